#!/usr/bin/env python3
"""
HiF-DTA - hierarchical drug–target affinity prediction
Command-line entry point

Usage:
    python hifdta.py prepare --dataset data/davis.tsv --embeddings embeddings/
    python hifdta.py train --dataset data/davis.tsv --embeddings embeddings/ --folds 5
    python hifdta.py train --desk 500 --stub-embeddings --epochs 20 --plot
    python hifdta.py evaluate --checkpoint results/run_x/fold0.ckpt --dataset data/davis.tsv --fold 0
    python hifdta.py predict --checkpoint results/run_x/fold0.ckpt --pairs pairs.tsv
    python hifdta.py gradcheck
    python hifdta.py decompose "CC(=O)Oc1ccccc1C(=O)O"
"""

import logging
import sys
from pathlib import Path

# Configure logging (stderr, so JSON reports on stdout stay clean)
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


def setup_project_paths():
    """Setup Python paths for the project structure"""
    project_root = Path(__file__).parent
    src_path = project_root / 'src'

    # Add src directory to Python path
    if str(src_path) not in sys.path:
        sys.path.insert(0, str(src_path))

    return project_root, src_path


def check_dependencies() -> bool:
    """Check if all required dependencies are available"""
    required_packages = ['numpy', 'scipy', 'pandas', 'matplotlib', 'click', 'rich', 'psutil']
    missing_packages = []
    for package in required_packages:
        try:
            __import__(package)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        logger.error("❌ Missing required packages: " + ", ".join(missing_packages))
        logger.error("   Install with: pip install -r requirements.txt")
        return False
    return True


if __name__ == "__main__":
    setup_project_paths()
    if not check_dependencies():
        sys.exit(1)
    from interfaces.cli_interface import main
    sys.exit(main())
