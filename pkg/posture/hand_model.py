"""
Modelo cinemático de la mano
Define los 15 DoFs canónicos y construye matrices de selección
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from posture.errors import DuplicateDofError, UnknownDofError

# Orden canónico del vector de ángulos (tabla de la figura del modelo de 15 DoFs)
DEFAULT_DOFS: Tuple[Tuple[str, str], ...] = (
    ("TA", "Thumb Abduction"),
    ("TR", "Thumb Rotation"),
    ("TM", "Thumb Metacarpal"),
    ("TI", "Thumb Interphalangeal"),
    ("IA", "Index Abduction"),
    ("IM", "Index Metacarpal"),
    ("IP", "Index Proximal"),
    ("MM", "Middle Metacarpal"),
    ("MP", "Middle Proximal"),
    ("RA", "Ring Abduction"),
    ("RM", "Ring Metacarpal"),
    ("RP", "Ring Proximal"),
    ("LA", "Little Abduction"),
    ("LM", "Little Metacarpal"),
    ("LP", "Little Proximal"),
)


@dataclass(frozen=True)
class DofDescriptor:
    """Un grado de libertad (ángulo articular) del modelo"""
    name: str
    description: str
    index: int


@dataclass(frozen=True)
class HandModel:
    """Lista ordenada de DoFs; fija el layout del vector de ángulos"""
    dofs: Tuple[DofDescriptor, ...]

    def __post_init__(self):
        seen = set()
        for position, dof in enumerate(self.dofs):
            if dof.name in seen:
                raise DuplicateDofError(dof.name)
            seen.add(dof.name)
            if dof.index != position:
                raise ValueError(f"Índice {dof.index} de {dof.name} no coincide con la posición {position}")

    @classmethod
    def from_names(cls, names: Sequence[str], descriptions: Optional[Sequence[str]] = None) -> "HandModel":
        """Construye un modelo a partir de nombres en orden"""
        descriptions = descriptions or [""] * len(names)
        return cls(tuple(DofDescriptor(name, text, i) for i, (name, text) in enumerate(zip(names, descriptions))))

    @property
    def n(self) -> int:
        return len(self.dofs)

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(dof.name for dof in self.dofs)

    def index_of(self, name: str) -> int:
        for dof in self.dofs:
            if dof.name == name:
                return dof.index
        raise UnknownDofError(name)

    def indices_of(self, names: Iterable[str]) -> List[int]:
        """
        Índices de una lista de DoFs, validando que no se repitan

        Args:
            names: Nombres de DoFs en el orden deseado

        Returns:
            Lista de índices 0-based en el mismo orden
        """
        indices: Dict[str, int] = {}
        for name in names:
            if name in indices:
                raise DuplicateDofError(name)
            indices[name] = self.index_of(name)
        return list(indices.values())


def default_hand_model() -> HandModel:
    """Modelo de 15 DoFs en el orden de la tabla"""
    return HandModel.from_names([name for name, _ in DEFAULT_DOFS],
                                [text for _, text in DEFAULT_DOFS])


def selection_matrix(model: HandModel, names: Sequence[str]) -> np.ndarray:
    """
    Matriz de selección m×n sobre DoFs con nombre

    Args:
        model: Modelo de mano
        names: DoFs medidos; la fila k mide names[k]

    Returns:
        Matriz con un único 1 por fila (vectores de la base canónica)
    """
    indices = model.indices_of(names)
    matrix = np.zeros((len(indices), model.n))
    matrix[np.arange(len(indices)), indices] = 1.0
    return matrix
