# SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
# SPDX-License-Identifier: Apache-2.0
"""Turn a static Gaussian-splat scan of a person into an animatable avatar."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
