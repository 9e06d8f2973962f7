import argparse
import logging
import os

from src.logsetup import setup_logging
from src.storage import artifacts
from src.storage.artifacts import RunStore

logger = logging.getLogger(__name__)


def check_run(out_dir: str) -> bool:
    """Print the status of a run directory; returns False if it does not exist."""
    if not os.path.isdir(out_dir):
        logger.error(f"Run directory {out_dir} does not exist.")
        return False

    store = RunStore(out_dir)
    found = store.list_artifacts()

    print("\n" + "=" * 50)
    print(f"📊 Run Status Report: {out_dir}")
    print("=" * 50)

    if not found:
        print("\n🔍 No pipeline artifacts found.")
        return True

    print(f"\n📦 Artifacts: {len(found)}")
    for name, size in found:
        print(f"  • {name}: {size:,} bytes")

    for name in (artifacts.HERALDED, artifacts.BACKGROUND, artifacts.VACUUM):
        if store.exists(name):
            ts = store.read_traces(name)
            print(f"\n📈 {name}: {ts.n_traces} traces × {ts.n_samples} samples, dt {ts.dt_ns} ns")

    if store.exists(artifacts.TRUTH):
        truth = store.read_truth()
        p = truth.heralded_state.diagonal()
        print(f"\n🎯 Ground truth: rho11 {p[1]:.4f}, herald probability {truth.herald_probability:.3g}")

    if store.exists(artifacts.MODE):
        mode = store.read_mode()
        print(f"\n〰️ Mode: {len(mode)} samples, purity {mode.purity:.4f}")

    if store.exists(artifacts.RHO):
        result = store.read_reconstruction()
        status = "converged" if result.converged else "not converged"
        print(f"\n🔄 Reconstruction: cutoff {result.rho.cutoff}, {result.iterations} iterations, {status}")

    if store.exists(artifacts.REPORT):
        report = store.read_report()
        print("\n📋 Report:")
        print(f"  • rho11: {report.rho11:.4f}")
        print(f"  • W(0,0): {report.wigner_origin:.5f}")
        if report.g2_zero is not None:
            print(f"  • g2(0): {report.g2_zero:.4f}")
        if report.g2_si is not None:
            print(f"  • g2_si: {report.g2_si:.2f}")

    print("\n" + "=" * 50)
    return True


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Show the status of a pipeline run directory")
    parser.add_argument('out_dir', nargs='?', default='runs/latest')
    args = parser.parse_args()

    setup_logging(fmt='%(levelname)-8s - %(message)s')
    print("🔍 Run Status Checker")
    print("---------------------")
    check_run(args.out_dir)
    print("\nDone!")
