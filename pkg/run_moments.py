"""
Moment-Method Toolkit Runner
Entry point for analyze | classify | synthesize | verify | quotient.
"""

import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from dotenv import load_dotenv
load_dotenv()

from src.cli.main import run
from src.config.settings import get_settings

logging.basicConfig(
    level=get_settings().log_level,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    handlers=[
        logging.StreamHandler(sys.stdout),
        *(
            [logging.FileHandler("logs/moments.log")]
            if Path("logs").exists()
            else []
        ),
    ],
)


if __name__ == "__main__":
    sys.exit(run())
