"""版本号

源码树中恒为开发版本；打包发布时可在同目录生成 _version.py 覆盖（该文件不入库）。
hatch 从本文件读取 __version__，因此这里必须保留字面量。
"""

__version__ = "0.1.0.dev0"

try:
    from sphere_fmt._version import __version__ as _release_version
except ImportError:
    pass
else:
    __version__ = _release_version
