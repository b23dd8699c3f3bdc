"""
posture: reconstrucción de posturas de la mano a partir de mediciones de guante
combinando un prior gaussiano de posturas de agarre con mediciones lineales
"""

__version__ = "1.0.0"
