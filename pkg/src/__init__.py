# src/__init__.py
"""
HiF-DTA - hierarchical drug–target affinity prediction
Source code package initialization

Subpackages are imported on demand; `src/` itself goes on sys.path so that
`core`, `chem`, `data_loaders`, `interfaces` and `utils` are top-level.
"""

__all__ = ['chem', 'core', 'data_loaders', 'interfaces', 'utils']
__version__ = "1.0.0"
__description__ = "Hierarchical fusion of local and global drug and protein views for binding affinity regression"
