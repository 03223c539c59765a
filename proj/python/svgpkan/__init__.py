# Copyright 2026 The SVGP-KAN Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Sparse variational GP Kolmogorov-Arnold networks."""

from svgpkan._core import (
    CsvError,
    Model,
    ModelConfig,
    NotPositiveDefinite,
    TrainingFailure,
    classify_lengthscale,
    generate,
    permutation_importance,
    psi1,
    psi2,
    run_experiment,
    select_features,
    set_thread_limit,
    train,
)

__all__ = [
    "CsvError",
    "Model",
    "ModelConfig",
    "NotPositiveDefinite",
    "TrainingFailure",
    "classify_lengthscale",
    "generate",
    "permutation_importance",
    "psi1",
    "psi2",
    "run_experiment",
    "select_features",
    "set_thread_limit",
    "train",
]
__version__ = "0.1.0"
