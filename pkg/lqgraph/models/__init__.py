from .common_models import ProblemKind, ProtoModel
from .model_utils import Dims, FloatArray, IntArray, frozen_array, hash_dictionary, recursive_normalizer
