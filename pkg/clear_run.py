import argparse
import logging
import os

from src.logsetup import setup_logging
from src.storage.artifacts import RunStore

logger = logging.getLogger(__name__)


def clear_run(out_dir: str) -> int:
    """Delete the pipeline artifacts of a run directory; other files are left alone."""
    if not os.path.isdir(out_dir):
        logger.info(f"Run directory {out_dir} does not exist. Nothing to clear.")
        return 0

    try:
        count = RunStore(out_dir).clear()
        logger.info(f"✅ Successfully cleared {count} artifacts from {out_dir}.")
        return count
    except OSError as e:
        logger.error(f"❌ Error clearing run directory: {e}")
        raise


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Delete the artifacts of a pipeline run directory")
    parser.add_argument('out_dir', nargs='?', default='runs/latest')
    args = parser.parse_args()

    setup_logging()
    print("🗑️  Run Cleanup Utility")
    print("-----------------------")
    clear_run(args.out_dir)
    print("Done!")
