__title__ = "dazzlesim"
__author__ = "dazzlesim developers"
__version__ = "0.1.0a"

from .caching import *
from .camera import *
from .config import *
from .datagen import *
from .doe_opt import *
from .errors import *
from .io import *
from .metrics import *
from .optics import *
from .restore import *
from .spectral import *
from .utils import VersionInfo

version_info: VersionInfo = VersionInfo._from_str(__version__)

del VersionInfo
