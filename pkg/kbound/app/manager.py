from __future__ import annotations

import json
from typing import Any

from kbound.app.montecarlo import simulate_dataset, trial_seed
from kbound.core.config_loader import get_default_config
from kbound.core.pipeline import BoundPipeline


def run_demo() -> dict[str, Any]:
    config = get_default_config().model_copy(update={"system": "G1", "noise_var": 0.1, "kernel": "TC"})
    data, g_true = simulate_dataset(config, trial_seed(config.seed, 0))
    result = BoundPipeline.from_config(config).run_once(data)

    rect = result.credible_set.rectangle
    summary = {
        "eta_hat": result.eta_hat.model_dump(),
        "credible_rectangle": json.loads(rect.model_dump_json()),
        "credible_mass": result.credible_set.mass,
        "mean_half_width": {m: float(b.half_widths.mean()) for m, b in result.bands.items()},
        "contained": {
            m: int(b.contains(result.ls_model.g_hat if m == "LS" else result.posterior.g_hat, g_true).sum())
            for m, b in result.bands.items()
        },
        "n_g": data.n_g,
    }
    return summary


if __name__ == "__main__":
    import pprint

    pprint.pp(run_demo())
