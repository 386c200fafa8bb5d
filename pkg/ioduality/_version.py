from importlib.metadata import PackageNotFoundError
from importlib.metadata import version

try:
    __version__ = version("ioduality")
except PackageNotFoundError:
    # running from a source checkout
    __version__ = "dev"
