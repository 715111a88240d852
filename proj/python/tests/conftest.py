import os
import sys

# ctest points this at the package tree in the build dir; it must win over an
# installed (possibly stale) copy, including editable-install import hooks.
_build_tree = os.environ.get("AFFINITY_PYTHON_DIR")
if _build_tree:
    sys.meta_path[:] = [f for f in sys.meta_path if not type(f).__module__.startswith("_editable_skbc_")]
    sys.path.insert(0, _build_tree)
