# Sphinx configuration for the meander-nfc docs.
#
# Build with: sphinx-build -b html source build/html

import sys
from pathlib import Path

# autodoc imports the package straight from the src layout
sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from meander_nfc import __version__  # noqa: E402

# -- Project information -----------------------------------------------------

project = 'meander-nfc'
author = 'Kamal Mustafa'
copyright = '2026, Kamal Mustafa'
release = __version__
version = '.'.join(release.split('.')[:2])

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
    'myst_parser',
]

autodoc_member_order = 'bysource'
autodoc_default_options = {
    'undoc-members': False,
    'show-inheritance': True,
}

myst_enable_extensions = [
    "colon_fence",
    "deflist",
    "dollarmath",
]
myst_heading_anchors = 3

source_suffix = {
    '.md': 'markdown',
}
exclude_patterns = ['build']
language = 'en'

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'navigation_depth': 3,
    'collapse_navigation': False,
}
