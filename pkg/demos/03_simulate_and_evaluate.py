"""Run full conversations with the scripted policy agents and score the run."""

from pathlib import Path

from shopsim import (HumanBaseline, SimulationConfig, evaluate_run,
                     load_catalog, load_personas, run_simulation)
from shopsim.backends import AdherentShopperBackend, RetrievalSalesbotBackend
from shopsim.retrieval import HashingEmbedder

FIXTURES = Path(__file__).parent.parent / "tests" / "fixtures"

catalog = load_catalog(FIXTURES / "catalog.json")
personas = load_personas(FIXTURES / "personas.json", catalog)

trajectories = []
for persona in personas:
    config = SimulationConfig(shopper_backend=AdherentShopperBackend(persona),
                              salesbot_backend=RetrievalSalesbotBackend(),
                              embedder=HashingEmbedder(), seed=0)
    trajectories.append(run_simulation(persona, catalog, config))

sample = trajectories[0]
print(f"--- {sample.persona_id} ({sample.termination}) ---")
for turn in sample.turns:
    text = turn.text if len(turn.text) < 120 else turn.text[:117] + "..."
    print(f"[{turn.role}] {text}")

baseline = HumanBaseline(mu_cpl=0.33, mu_red=0.09, source="demo")
report, records, redundancy = evaluate_run(
    trajectories, {p.name: p for p in personas}, baseline)
print(f"\noverall DA: {report.overall.da_rate:.3f}  "
      f"Crit.: {report.overall.crit_mean:.2f}  "
      f"%Cpl.: {report.overall.cpl_mean:.3f}  "
      f"Red.: {report.overall.red_mean:.3f}")
print(f"delta %Cpl. vs human: {report.delta_cpl:+.3f}  "
      f"delta Red.: {report.delta_red:+.3f}")
