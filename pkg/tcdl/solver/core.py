import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict

__all__ = [
    "ArrayModel",
    "as_matrix",
    "as_vector",
    "FloatArray",
    "independent_rows",
]

FloatArray = npt.NDArray[np.float64]


class ArrayModel(BaseModel):
    "Base for solver payloads that carry numpy arrays."

    model_config = ConfigDict(
        arbitrary_types_allowed=True,
        frozen=True,
    )


def as_vector(value: object, size: int | None = None) -> FloatArray:
    if value is None:
        return np.zeros(size or 0)

    vector = np.asarray(value, dtype=float).reshape(-1)

    return vector


def as_matrix(value: object, n_cols: int) -> FloatArray:
    if value is None:
        return np.zeros((0, n_cols))

    matrix = np.asarray(value, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, n_cols) if matrix.size else np.zeros((0, n_cols))

    return matrix


def independent_rows(
    matrix: FloatArray,
    tol: float = 1e-10,
) -> list[int]:
    """Greedy maximal set of linearly independent rows, in row order.

    A row is kept when its residual after projection on the rows kept so far
    is larger than `tol` relative to its norm.
    """

    kept: list[int] = []
    basis = np.zeros((0, matrix.shape[1]))

    for i, row in enumerate(matrix):
        norm = np.linalg.norm(row)
        if norm == 0.0:
            continue
        residual = row.copy()
        # two Gram-Schmidt sweeps keep `basis` orthonormal
        for _ in range(2):
            residual = residual - basis.T @ (basis @ residual)
        residual_norm = np.linalg.norm(residual)
        if residual_norm > tol * norm:
            kept.append(i)
            basis = np.vstack([basis, residual / residual_norm])

    return kept


if __name__ == "__main__":
    rows = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])

    print("result:", independent_rows(matrix=rows))
