"""sphere-fmt - 球面紧框架 (tight framelet) 与快速多层滤波器组变换"""

from sphere_fmt.version import __version__

__all__ = ["__version__"]
