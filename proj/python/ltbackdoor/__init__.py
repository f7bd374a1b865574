# Copyright 2026 The ltbackdoor Authors
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

"""Long-tail backdoor training: Python front end to the C++ core."""

from ._core import (
    Config,
    ConfigError,
    DomainError,
    augment,
    blend,
    diversity_loss,
    group_split,
    logit_adjust,
    longtail_counts,
    operator_names,
    plot,
    render_triggers,
    softmax,
    train,
    update_strengths,
)

__all__ = [
    "Config",
    "ConfigError",
    "DomainError",
    "augment",
    "blend",
    "diversity_loss",
    "group_split",
    "logit_adjust",
    "longtail_counts",
    "operator_names",
    "plot",
    "render_triggers",
    "softmax",
    "train",
    "update_strengths",
]
