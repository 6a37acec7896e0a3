"""Builds the afss extension module by delegating to cargo.

The compiled crate is a cdylib named libafss.so (libafss.dylib on macOS);
this copies it to the extension path Python expects.
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

ROOT = Path(__file__).resolve().parent.parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "afss-python"],
            cwd=ROOT,
            check=True,
        )
        release = ROOT / "target" / "release"
        if sys.platform == "darwin":
            built = release / "libafss.dylib"
        elif sys.platform == "win32":
            built = release / "afss.dll"
        else:
            built = release / "libafss.so"
        dest = Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built, dest)


setup(
    ext_modules=[Extension("afss", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
