"""shopsim: persona-driven retail shopping simulation and trajectory rewards."""

from .catalog import (Catalog, Persona, Product, format_money, load_catalog,
                      load_personas, parse_money, resolve_product_name)
from .metrics import (DecisionRecord, HumanBaseline, decision_alignment,
                      evaluate_run, first_turn_criteria_count,
                      sentence_completeness, tfidf_redundancy)
from .orchestrator import (SimulationConfig, Trajectory, read_trajectories,
                           run_simulation, write_trajectories)
from .protocol import parse_agent_output, parse_turn
from .retrieval import HashingEmbedder, build_product_index, query_top_k
from .reward import (NgramClassifier, RewardVector, RewardWeights,
                     aggregate_reward, broadcast, score_trajectory,
                     train_ngram_classifier)
from .reward_service import RewardScorer, RewardServer

__version__ = "0.1.0"
