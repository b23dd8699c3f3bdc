"""
Errores del paquete posture
Cada error lleva un código estable que la CLI imprime en stderr
"""

from typing import Optional


class PostureError(Exception):
    """Error base de la librería"""

    code = "POSTURE_ERROR"
    hint: Optional[str] = None

    def __init__(self, message: str, hint: Optional[str] = None):
        super().__init__(message)
        if hint is not None:
            self.hint = hint


class ConfigError(PostureError):
    code = "CONFIG"


class FileFormatError(PostureError):
    """Error de lectura de un archivo (CSV o JSON) con su línea"""

    code = "FILE_FORMAT"

    def __init__(self, path, message: str, line: Optional[int] = None):
        location = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


class DimensionMismatchError(PostureError):
    code = "DIMENSION_MISMATCH"


class NonFiniteInputError(PostureError):
    code = "NON_FINITE_INPUT"


# Modelo de mano

class UnknownDofError(PostureError):
    code = "UNKNOWN_DOF"

    def __init__(self, name: str):
        super().__init__(f"DoF desconocido: {name!r}")
        self.name = name


class DuplicateDofError(PostureError):
    code = "DUPLICATE_DOF"

    def __init__(self, name: str):
        super().__init__(f"DoF repetido: {name!r}")
        self.name = name


# Prior

class InsufficientSamplesError(PostureError):
    code = "INSUFFICIENT_SAMPLES"
    hint = "Se necesitan al menos 2 posturas para estimar la covarianza"


class SingularCovarianceError(PostureError):
    code = "SINGULAR_COVARIANCE"
    hint = "Aumenta el ridge (--ridge) o agrega más posturas al prior"


# Estimadores

class RankDeficientError(PostureError):
    code = "RANK_DEFICIENT"


class IllConditionedInnovationError(PostureError):
    code = "ILL_CONDITIONED_INNOVATION"
    hint = "Revisa H y R; una R muy pequeña con H casi dependiente no es invertible"


class IllConditionedGramError(IllConditionedInnovationError):
    code = "ILL_CONDITIONED_GRAM"


class SingularPriorError(PostureError):
    code = "SINGULAR_PRIOR"
    hint = "Usa un ridge positivo o la forma MVE (Sherman-Morrison-Woodbury)"


class SingularNoiseError(PostureError):
    code = "SINGULAR_NOISE"
    hint = "R no es invertible: usa el método 'mve' en lugar de 'information'"


class NotSelectionMatrixError(PostureError):
    code = "NOT_SELECTION_MATRIX"


class SingularMeasuredBlockError(PostureError):
    code = "SINGULAR_MEASURED_BLOCK"


# Calibración

class RankDeficientPosesError(PostureError):
    code = "RANK_DEFICIENT_POSES"
    hint = ("Las posturas de referencia no generan el espacio de estados: "
            "adquiere al menos n posturas variadas (N >= 15 para el modelo de 15 DoFs)")


class InsufficientWindowSamplesError(PostureError):
    code = "INSUFFICIENT_WINDOW_SAMPLES"


# Estadística y reportes

class TooFewSamplesError(PostureError):
    code = "TOO_FEW_SAMPLES"


class TooFewDistinctError(PostureError):
    code = "TOO_FEW_DISTINCT"


class IncompleteReportError(PostureError):
    code = "INCOMPLETE_REPORT"
