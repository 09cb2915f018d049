"""Score a trajectory with the full reward stack and broadcast to tokens."""

from pathlib import Path

from shopsim import (RewardWeights, SimulationConfig, broadcast, load_catalog,
                     load_personas, run_simulation, score_trajectory,
                     train_ngram_classifier)
from shopsim.backends import AdherentShopperBackend, RetrievalSalesbotBackend
from shopsim.llm_client import ScriptedChatBackend
from shopsim.retrieval import HashingEmbedder

FIXTURES = Path(__file__).parent.parent / "tests" / "fixtures"

catalog = load_catalog(FIXTURES / "catalog.json")
personas = load_personas(FIXTURES / "personas.json", catalog)
persona = next(p for p in personas if p.name == "Alex")

config = SimulationConfig(shopper_backend=AdherentShopperBackend(persona),
                          salesbot_backend=RetrievalSalesbotBackend(),
                          embedder=HashingEmbedder(), seed=0)
trajectory = run_simulation(persona, catalog, config)

# Human-likeness classifier on tiny synthetic marker corpora.
classifier = train_ngram_classifier(
    [f"yeah gonna grab item {i}" for i in range(20)],
    [f"certainly furthermore select item {i}" for i in range(20)], seed=0)

# A scripted judge stands in for a remote grader.
judge = ScriptedChatBackend(["The reasoning tracks the budget.\nSCORE: 0.8"])

vector = score_trajectory(trajectory, persona, RewardWeights(),
                          classifier=classifier, judge_backend=judge)
print("components:")
for name, value in vector.components.items():
    shown = "unavailable" if value is None else f"{value:.3f}"
    print(f"  {name:10s} {shown}")
print(f"aggregate: {vector.aggregate:.4f}")

mask = ["shopper", "shopper", "other", "shopper", "other"]
spread = broadcast(vector.aggregate, mask)
print(f"broadcast over {mask}: {[round(r, 4) for r in spread.rewards]}")
