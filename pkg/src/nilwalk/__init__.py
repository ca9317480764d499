"""Random walks on crystal lattices over stratified nilpotent groups: exact moments and expansion checks."""
from .errors import NilwalkError
from .models import Model, bundled_models, load_model
from .nilgroup import StratifiedAlgebra, abelian, engel, heisenberg
from .polyalg import Polynomial, QuadraticSurd, parse_polynomial

__all__ = ["Model", "NilwalkError", "Polynomial", "QuadraticSurd", "StratifiedAlgebra", "abelian", "bundled_models",
           "engel", "heisenberg", "load_model", "parse_polynomial"]
