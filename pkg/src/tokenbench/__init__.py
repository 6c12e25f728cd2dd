"""tokenbench: endpoint-granular benchmarking of LLM serving endpoints.

Measures simulated (and pluggably real) serving endpoints along speed,
latency tails, blended price, quality, output-distribution fidelity, and
modeled energy, and synthesizes them into joules-per-correct-answer,
dollars-per-correct-answer, and workload-preset composite rankings.
"""

__version__ = "0.1.0"
