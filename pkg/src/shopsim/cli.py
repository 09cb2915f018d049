"""Command-line entry points.

Subcommands: validate-data, simulate, evaluate, baseline-compute,
reward-score, reward-serve. Data errors exit with status 1 and a message on
stderr; usage and configuration errors exit with status 2.
"""

from __future__ import annotations

import hashlib
import json
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import click

from .backends import (AcceptFirstShopperBackend, AdherentShopperBackend,
                       RetrievalSalesbotBackend)
from .catalog import Catalog, Persona, load_catalog, load_personas, tokenize
from .errors import ConfigurationError, ShopsimError
from .metrics import HumanBaseline, sentence_completeness, tfidf_redundancy
from .metrics import evaluate_run
from .orchestrator import (SimulationConfig, Trajectory, run_simulation,
                           read_trajectories, trajectory_to_dict,
                           write_trajectories)
from .prompts import CATEGORIES, category_label
from .retrieval import HashingEmbedder
from .reward import NgramClassifier, RewardWeights
from .reward_service import RewardScorer, serve_forever

__all__ = ["main", "default_token_role_mask"]


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_data(catalog_path: str, personas_path: str) -> tuple[Catalog, list[Persona]]:
    catalog = load_catalog(catalog_path)
    personas = load_personas(personas_path, catalog)
    return catalog, personas


def _read_weights(path: str | None) -> RewardWeights:
    if path is None:
        return RewardWeights()
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".toml"):
        doc = tomllib.loads(text)
    else:
        doc = json.loads(text)
    if "weights" in doc:
        doc = doc["weights"]
    return RewardWeights.from_mapping({k: float(v) for k, v in doc.items()})


def default_token_role_mask(trajectory: Trajectory) -> list[str]:
    """Whitespace-token role mask: one role label per token of each turn."""
    mask: list[str] = []
    for turn in trajectory.turns:
        mask.extend([turn.role] * len(tokenize(turn.text)))
    return mask


@click.group()
def main() -> None:
    """Persona-driven retail shopping simulation and evaluation toolkit."""


@main.command("validate-data")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--personas", "personas_path", required=True, type=click.Path(exists=True))
def validate_data(catalog_path: str, personas_path: str) -> None:
    """Validate a catalog and persona file; report counts per category."""
    try:
        catalog, personas = _load_data(catalog_path, personas_path)
    except ShopsimError as exc:
        _fail(str(exc))
        return
    for category in catalog.categories:
        n_products = len(catalog.products(category))
        n_personas = sum(1 for p in personas if p.category == category)
        click.echo(f"{category_label(category)}: {n_products} products, "
                   f"{n_personas} personas")
    infeasible = sum(1 for p in personas if p.infeasible)
    click.echo(f"OK: {len(personas)} personas ({infeasible} infeasible), "
               f"{sum(len(catalog.products(c)) for c in catalog.categories)} products")


def _build_config(config_path: str | None, seed: int | None) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    if config_path is not None:
        doc = tomllib.loads(Path(config_path).read_text(encoding="utf-8"))
        doc = doc.get("simulate", doc)
    if seed is not None:
        doc["seed"] = seed
    return doc


@main.command("simulate")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--personas", "personas_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--limit", type=int, default=None, help="Only the first N personas.")
@click.option("--seed", type=int, default=None)
def simulate(catalog_path: str, personas_path: str, out_dir: str,
             config_path: str | None, limit: int | None, seed: int | None) -> None:
    """Run one conversation per persona with the deterministic policy agents."""
    try:
        catalog, personas = _load_data(catalog_path, personas_path)
        options = _build_config(config_path, seed)
    except ShopsimError as exc:
        _fail(str(exc))
        return
    except (OSError, tomllib.TOMLDecodeError) as exc:
        _fail(str(exc), code=2)
        return
    shopper_kind = options.pop("shopper", "adherent")
    if shopper_kind not in ("adherent", "accept_first"):
        _fail(f"unknown shopper policy {shopper_kind!r}", code=2)
        return
    if limit is not None:
        personas = personas[:limit]
    embedder = HashingEmbedder()
    trajectories: list[Trajectory] = []
    for persona in personas:
        if shopper_kind == "adherent":
            shopper = AdherentShopperBackend(persona)
        else:
            names = tuple(p.name for p in catalog.products(persona.category))
            shopper = AcceptFirstShopperBackend(persona, names)
        try:
            config = SimulationConfig(shopper_backend=shopper,
                                      salesbot_backend=RetrievalSalesbotBackend(),
                                      embedder=embedder, **options)
        except (TypeError, ValueError) as exc:
            _fail(str(exc), code=2)
            return
        trajectories.append(run_simulation(persona, catalog, config))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj_path = out / "trajectories.jsonl"
    write_trajectories(trajectories, str(traj_path))
    manifest = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "catalog_sha256": _sha256(Path(catalog_path)),
        "personas_sha256": _sha256(Path(personas_path)),
        "trajectories_sha256": _sha256(traj_path),
        "count": len(trajectories),
        "shopper": shopper_kind,
        "config": trajectories[0].config if trajectories else {},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True),
                                       encoding="utf-8")
    click.echo(f"wrote {len(trajectories)} trajectories to {traj_path}")


def _format_cell(value: float | None, as_percent: bool = False) -> str:
    if value is None:
        return "—"
    return f"{value * 100:.1f}%" if as_percent else f"{value:.3f}"


@main.command("evaluate")
@click.option("--runs", "runs_path", required=True, type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--personas", "personas_path", required=True, type=click.Path(exists=True))
@click.option("--baseline", "baseline_path", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path())
def evaluate(runs_path: str, catalog_path: str, personas_path: str,
             baseline_path: str | None, out_path: str | None) -> None:
    """Score a trajectory run and render the per-category metric table."""
    try:
        catalog, personas = _load_data(catalog_path, personas_path)
        trajectories = list(read_trajectories(runs_path))
        baseline = None
        if baseline_path is not None:
            doc = json.loads(Path(baseline_path).read_text(encoding="utf-8"))
            baseline = HumanBaseline(mu_cpl=doc["mu_cpl"], mu_red=doc["mu_red"],
                                     source=doc.get("source", baseline_path))
        report, _, _ = evaluate_run(trajectories,
                                    {p.name: p for p in personas}, baseline)
    except (ShopsimError, ValueError, KeyError, OSError) as exc:
        _fail(str(exc))
        return
    header = f"{'Category':<16}{'N':>4}{'DA':>8}{'Crit.':>8}{'%Cpl.':>8}" \
             f"{'Red.':>8}{'End.':>8}{'Fmt.':>8}"
    click.echo(header)
    click.echo("-" * len(header))
    rows = [(category_label(c), report.per_category[c])
            for c in CATEGORIES if c in report.per_category]
    rows += [(label, metrics) for label, metrics in
             ((c, report.per_category[c]) for c in sorted(report.per_category)
              if c not in CATEGORIES)]
    rows.append(("Overall", report.overall))
    for label, m in rows:
        click.echo(f"{label:<16}{m.count:>4}"
                   f"{_format_cell(m.da_rate, True):>8}"
                   f"{_format_cell(m.crit_mean):>8}"
                   f"{_format_cell(m.cpl_mean, True):>8}"
                   f"{_format_cell(m.red_mean):>8}"
                   f"{_format_cell(m.end_rate, True):>8}"
                   f"{_format_cell(m.fmt_rate, True):>8}")
    if report.delta_cpl is not None:
        click.echo(f"Δ %Cpl. vs human: {report.delta_cpl * 100:+.1f}%")
    if report.delta_red is not None:
        click.echo(f"Δ Red. vs human: {report.delta_red:+.3f}")
    if report.excluded_trajectories:
        click.echo(f"excluded (errored): {len(report.excluded_trajectories)}")
    if out_path is not None:
        Path(out_path).write_text(json.dumps(report.to_dict(), indent=2,
                                             sort_keys=True), encoding="utf-8")
        click.echo(f"wrote report to {out_path}")


@main.command("baseline-compute")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def baseline_compute(corpus_path: str, out_path: str) -> None:
    """Compute human-baseline conversational statistics from a JSONL corpus.

    Each line: {"category": str, "utterances": [str, ...]} for one human
    shopper's side of a conversation.
    """
    records: list[dict[str, Any]] = []
    try:
        with open(corpus_path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    records.append(json.loads(line))
        if not records:
            raise ValueError("empty corpus")
        cpl_values = [sentence_completeness(r["utterances"]) for r in records]
        redundancy = tfidf_redundancy(
            [(r["category"], "\n".join(r["utterances"])) for r in records])
    except (ValueError, KeyError, OSError, TypeError) as exc:
        _fail(str(exc))
        return
    baseline = {
        "mu_cpl": sum(cpl_values) / len(cpl_values),
        "mu_red": redundancy.overall_mean if redundancy.overall_mean is not None else 0.0,
        "source": corpus_path,
        "n_conversations": len(records),
    }
    Path(out_path).write_text(json.dumps(baseline, indent=2, sort_keys=True),
                              encoding="utf-8")
    click.echo(f"mu_cpl={baseline['mu_cpl']:.4f} mu_red={baseline['mu_red']:.4f} "
               f"-> {out_path}")


def _build_scorer(catalog_path: str, personas_path: str,
                  classifier_path: str | None,
                  weights_path: str | None) -> RewardScorer:
    _, personas = _load_data(catalog_path, personas_path)
    classifier = None
    if classifier_path is not None:
        classifier = NgramClassifier.load(classifier_path)
    return RewardScorer(personas={p.name: p for p in personas},
                        weights=_read_weights(weights_path),
                        classifier=classifier)


@main.command("reward-score")
@click.option("--runs", "runs_path", required=True, type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--personas", "personas_path", required=True, type=click.Path(exists=True))
@click.option("--classifier", "classifier_path", type=click.Path(exists=True))
@click.option("--weights", "weights_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def reward_score(runs_path: str, catalog_path: str, personas_path: str,
                 classifier_path: str | None, weights_path: str | None,
                 out_path: str) -> None:
    """Score trajectories offline with the same engine the service exposes."""
    try:
        scorer = _build_scorer(catalog_path, personas_path, classifier_path,
                               weights_path)
        trajectories = list(read_trajectories(runs_path))
    except (ShopsimError, ValueError, OSError) as exc:
        _fail(str(exc))
        return
    lines = []
    for trajectory in trajectories:
        lines.append(json.dumps({
            "trajectory": trajectory_to_dict(trajectory),
            "token_role_mask": default_token_role_mask(trajectory),
        }))
    results = scorer.score_lines("\n".join(lines))
    with open(out_path, "w", encoding="utf-8") as handle:
        for result in results:
            handle.write(json.dumps(result, sort_keys=True) + "\n")
    errors = sum(1 for r in results if "error" in r)
    click.echo(f"scored {len(results)} trajectories ({errors} errors) -> {out_path}")
    if errors:
        sys.exit(1)


@main.command("reward-serve")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--personas", "personas_path", required=True, type=click.Path(exists=True))
@click.option("--classifier", "classifier_path", type=click.Path(exists=True))
@click.option("--weights", "weights_path", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8130, show_default=True)
def reward_serve(catalog_path: str, personas_path: str,
                 classifier_path: str | None, weights_path: str | None,
                 host: str, port: int) -> None:
    """Serve the reward engine over HTTP (POST /score, GET /healthz)."""
    try:
        scorer = _build_scorer(catalog_path, personas_path, classifier_path,
                               weights_path)
    except (ShopsimError, ValueError, OSError) as exc:
        _fail(str(exc))
        return
    except ConfigurationError as exc:
        _fail(str(exc), code=2)
        return
    click.echo(f"serving on http://{host}:{port} (POST /score, GET /healthz)")
    serve_forever(scorer, host, port)


if __name__ == "__main__":
    main()
