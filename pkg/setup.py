# pylint: disable=no-name-in-module,import-error,deprecated-module
from distutils.core import setup
from os import path

from setuptools import find_packages

DESCRIPTION = "loganvil - Windows event log diagnosis and fine-tuning dataset pipeline"


# Utility function to cat in a file (used for the README)
def read(fname):
    this_directory = path.abspath(path.dirname(__file__))
    with open(path.join(this_directory, fname), encoding='utf-8') as f:
        return f.read()


setup(name='loganvil',
      version='0.1.0',
      python_requires='>=3.8',
      description=DESCRIPTION,
      long_description=read('README.md'),
      long_description_content_type='text/markdown',
      packages=find_packages(include=["loganvil", "loganvil.*"]),
      package_data={'loganvil.tests': ['data/*']},
      include_package_data=True,
      license="MIT",
      install_requires=['click', 'requests', 'networkx'],
      entry_points={
          'console_scripts': ['loganvil=loganvil.main:loganvil_cli'],
      })
