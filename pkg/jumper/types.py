from __future__ import annotations

from typing import Literal, TypeVar

import numpy as np
import numpy.typing as npt

T = TypeVar("T")

FloatArray = npt.NDArray[np.floating]
IntArray = npt.NDArray[np.integer]

Precision = Literal["float32", "float64"]
TrainingMode = Literal["reinforce", "cross_entropy"]
