import sys

from main import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nInterrupted, shutting down...")
        sys.exit(130)
    except Exception as e:
        print(f"Fatal error: {e}")
        raise
