import sys
from pathlib import Path

# allow intra-test imports like golden_trace
sys.path.insert(0, str(Path(__file__).parent))
