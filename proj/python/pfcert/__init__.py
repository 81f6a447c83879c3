"""Certified injection regions for AC power flow."""

from ._pfcert import *  # noqa: F401,F403
from ._pfcert import __doc__  # noqa: F401
