"""Allow running with `python -m sphere_fmt`."""

from sphere_fmt.main import main

main()
