"""Makes the package importable straight from a CMake build tree.

An installed wheel (pip install .) takes priority; otherwise the extension is
picked up from CTSAC_BUILD_DIR (or ../../build) and the pure-python package
from python/.
"""

import os
import sys
from pathlib import Path

try:
    import ctsac  # noqa: F401  (already installed)
except ImportError:
    root = Path(__file__).resolve().parents[2]
    build_dir = Path(os.environ.get("CTSAC_BUILD_DIR", root / "build"))
    sys.path.insert(0, str(root / "python"))
    sys.path.insert(0, str(build_dir))
    ext = list(build_dir.glob("_ctsac*.so"))
    if not ext:
        raise ImportError(
            f"no installed ctsac package and no _ctsac extension under {build_dir}; "
            "build with -DCTSAC_BUILD_PYTHON=ON or pip install the package"
        )
    # python/ctsac/__init__.py imports `from ._ctsac import ...`; satisfy the
    # relative import by aliasing the built extension into the package.
    import importlib.util

    spec = importlib.util.spec_from_file_location("ctsac._ctsac", ext[0])
    module = importlib.util.module_from_spec(spec)
    sys.modules["ctsac._ctsac"] = module
    spec.loader.exec_module(module)
