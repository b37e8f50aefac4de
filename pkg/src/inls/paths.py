from pathlib import Path
import os

from dotenv import load_dotenv


def project_root() -> Path:
    env_root = os.getenv("INLS_PROJECT_ROOT")
    if env_root:
        return Path(env_root).resolve()
    return Path(__file__).resolve().parents[2]


ROOT = project_root()
load_dotenv(ROOT / ".env")

CONFIGS = ROOT / "configs"


def output_dir(override: str | Path | None = None) -> Path:
    """Where reports and CSV artifacts go: explicit flag, then INLS_OUTPUT_DIR, then outputs/."""
    if override:
        return Path(override).resolve()
    env_out = os.getenv("INLS_OUTPUT_DIR")
    if env_out:
        return Path(env_out).resolve()
    return ROOT / "outputs"
