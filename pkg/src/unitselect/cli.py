"""Command-line pipeline: simulate, informer, label, train, predict, select,
evaluate, report.

Every subcommand is a pure function of its file inputs, flags and seed;
re-running an invocation reproduces its outputs byte for byte.  Exit codes:
0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import cells, datagen, informer, learner
from .bounds import DEFAULT_BENEFIT_VECTOR, BenefitVector
from .model import ScmConfig

__all__ = ["SelectionPolicy", "main"]

# Published headline errors, echoed in metrics output for comparison.
REFERENCE_MAE_LOWER = 0.5652
REFERENCE_MAE_UPPER = 0.5447

SELECTION_MODES = ("lower_positive", "top_k_lower", "top_k_midpoint")


@dataclass(frozen=True)
class SelectionPolicy:
    mode: str
    k: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in SELECTION_MODES:
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.mode.startswith("top_k") and (self.k is None or self.k < 1):
            raise ValueError(f"mode {self.mode} needs k >= 1")


def _parse_vector(text: str) -> BenefitVector:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError("benefit vector needs 4 comma-separated payoffs")
    return BenefitVector(*(float(p) for p in parts))


def _load_config(path: str) -> ScmConfig:
    return ScmConfig.load(path)


def _check_dataset(path: str, config: ScmConfig, regime: str) -> None:
    meta = datagen.read_meta(path)
    if meta.config_fingerprint != config.fingerprint:
        raise ValueError(
            f"{path} was generated from a different model configuration "
            f"(fingerprint {meta.config_fingerprint[:12]}..., expected "
            f"{config.fingerprint[:12]}...)"
        )
    if meta.kind != regime:
        raise ValueError(f"{path} holds {meta.kind} data, expected {regime}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.n < 0:
        raise ValueError("--n must be nonnegative")
    datagen.write_dataset(args.out, config, args.kind, args.n, args.seed, fmt=args.fmt)
    print(f"wrote {args.n} {args.kind} samples to {args.out}")
    return 0


def _cmd_informer(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    records = informer.informer_table(config, args.vector)
    informer.write_informer_csv(records, args.out)
    print(f"wrote {len(records)} cell records to {args.out}")
    return 0


def _cmd_label(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    _check_dataset(args.exp, config, "experimental")
    _check_dataset(args.obs, config, "observational")
    exp_data, _ = datagen.read_dataset(args.exp)
    obs_data, _ = datagen.read_dataset(args.obs)
    exp_map = cells.aggregate(exp_data, "experimental")
    obs_map = cells.aggregate(obs_data, "observational")
    labels, drops = cells.build_labels(exp_map, obs_map, args.vector, args.threshold)
    if labels:
        train_set, test_set = cells.split(
            labels, cells.SplitSpec(test_fraction=args.test_fraction, seed=args.seed)
        )
    else:
        print("warning: no eligible cells at this threshold", file=sys.stderr)
        train_set, test_set = [], []

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_obs = config.n_observed
    cells.write_labels_csv(train_set, out_dir / "train_labels.csv", n_obs)
    cells.write_labels_csv(test_set, out_dir / "test_labels.csv", n_obs)
    cells.write_drops_csv(drops, out_dir / "drops.csv")
    print(
        f"eligible {len(labels)} cells ({len(train_set)} train, {len(test_set)} test), "
        f"dropped {len(drops)}; wrote {out_dir}"
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    labels = cells.read_labels_csv(args.labels)
    if not labels:
        raise ValueError(f"no labeled cells in {args.labels}")
    hp = learner.Hyperparams(
        hidden_width=args.hidden_width,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        seed=args.seed,
        batch_size=args.batch_size,
    )
    features = [lab.cell.bits for lab in labels]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, targets in (
        ("lower", [lab.lower_label for lab in labels]),
        ("upper", [lab.upper_label for lab in labels]),
    ):
        model = learner.train(features, targets, hp)
        path = out_dir / f"model_{name}.json"
        learner.save_model(model, path)
        print(
            f"{name}: trained on {len(labels)} cells, "
            f"final loss {model.loss_history[-1]:.6g}, wrote {path}"
        )
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    model_lower = learner.load_model(args.model_lower)
    model_upper = learner.load_model(args.model_upper)
    if model_lower.n_inputs != model_upper.n_inputs:
        raise ValueError("lower and upper models disagree on input width")
    rows = learner.predict_all(
        model_lower, model_upper, model_lower.n_inputs, args.vector
    )
    learner.write_predictions_csv(rows, args.out)
    repaired = sum(r.repaired for r in rows)
    print(f"wrote {len(rows)} predictions to {args.out} ({repaired} repaired)")
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    policy = SelectionPolicy(mode=args.mode, k=args.k)
    rows = learner.read_predictions_csv(args.predictions)
    if policy.mode == "lower_positive":
        chosen = [r for r in rows if r.pred_lower > 0.0]
    elif policy.mode == "top_k_lower":
        ranked = sorted(rows, key=lambda r: (-r.pred_lower, r.cell_id))
        chosen = ranked[: policy.k]
    else:
        ranked = sorted(
            rows, key=lambda r: (-(r.pred_lower + r.pred_upper) / 2.0, r.cell_id)
        )
        chosen = ranked[: policy.k]
    chosen.sort(key=lambda r: (-r.pred_lower, r.cell_id))
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "pred_lower", "pred_upper"])
        for r in chosen:
            writer.writerow(
                [r.cell_id, format(r.pred_lower, ".12g"), format(r.pred_upper, ".12g")]
            )
    print(f"selected {len(chosen)} cells to {args.out}")
    return 0


def _load_pred_truth(
    args: argparse.Namespace,
) -> tuple[list[learner.PredictionRow], list[informer.InformerRecord]]:
    preds = learner.read_predictions_csv(args.predictions)
    truth = informer.read_informer_csv(args.informer)
    if len(preds) != len(truth):
        raise ValueError(
            f"{args.predictions} has {len(preds)} rows but {args.informer} has "
            f"{len(truth)}; they must cover the same cell space"
        )
    return preds, truth


def _cmd_evaluate(args: argparse.Namespace) -> int:
    preds, truth = _load_pred_truth(args)
    metrics = learner.evaluate(preds, truth, sample_n=args.sample_n, seed=args.seed)
    metrics["reference_mae_lower"] = REFERENCE_MAE_LOWER
    metrics["reference_mae_upper"] = REFERENCE_MAE_UPPER
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    sys.stdout.write(text)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    preds, truth = _load_pred_truth(args)
    ids = learner.sample_cell_ids(len(preds), args.sample_n, args.seed)
    pred_by_id = {r.cell_id: r for r in preds}
    truth_by_id = {r.cell.id: r for r in truth}
    with open(args.out, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell_id", "true_lower", "pred_lower", "true_upper", "pred_upper"])
        for cid in ids:
            p = pred_by_id[int(cid)]
            t = truth_by_id[int(cid)]
            writer.writerow(
                [
                    int(cid),
                    format(t.true_lower, ".12g"),
                    format(p.pred_lower, ".12g"),
                    format(t.true_upper, ".12g"),
                    format(p.pred_upper, ".12g"),
                ]
            )
    print(f"wrote {len(ids)} sampled cells to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="unitselect",
        description="Learn bounds of a unit-selection benefit function from "
        "simulated experimental and observational data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_vector(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--vector",
            type=_parse_vector,
            default=DEFAULT_BENEFIT_VECTOR,
            help="benefit vector as beta,gamma,theta,delta (default 1,-1,-1,-2)",
        )

    p = sub.add_parser("simulate", help="generate a seeded dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", required=True, choices=datagen.REGIMES)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fmt", choices=("csv", "packed"), default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("informer", help="exact per-cell ground truth table")
    p.add_argument("--config", required=True)
    add_vector(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_informer)

    p = sub.add_parser("label", help="aggregate datasets into bound labels")
    p.add_argument("--exp", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--config", required=True)
    add_vector(p)
    p.add_argument("--threshold", type=int, default=cells.DEFAULT_THRESHOLD)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("train", help="fit lower and upper bound models")
    p.add_argument("--labels", required=True)
    p.add_argument("--hidden-width", type=int, default=128)
    p.add_argument("--epochs", type=int, default=600)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict bounds for every cell")
    p.add_argument("--model-lower", required=True)
    p.add_argument("--model-upper", required=True)
    add_vector(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("select", help="pick cells from predicted bounds")
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", required=True, choices=SELECTION_MODES)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("evaluate", help="mean absolute errors vs ground truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--informer", required=True)
    p.add_argument("--sample-n", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("report", help="paired true/predicted bounds for plotting")
    p.add_argument("--predictions", required=True)
    p.add_argument("--informer", required=True)
    p.add_argument("--sample-n", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
