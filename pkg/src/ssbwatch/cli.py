"""Command-line front end tying the pipeline together.

Subcommands mirror the workflow stages so each artifact is cacheable:

    gen-dataset  synthesize a labeled spectrogram dataset
    train        fit a detector (cnn, knn, or svm) on a dataset
    eval         score a trained model on the test split
    bench        time single-sample classification
    gain-sweep   detector response vs jammer gain
    pca-analyze  cumulative explained-variance curve

Every command is reproducible from (config, seed); reports land next to
their CSV and PNG exports in the chosen output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import report as rpt
from .cnn import (
    TrainConfig, build_detector, classify, load_cnn, save_cnn, save_history_csv, train,
)
from .config import load_config, parse_dims, write_default_config
from .containers import ContainerError, peek_magic
from .cnn.network import CNN_MAGIC
from .evalbench import (
    accuracy_percent, fa_md_curve, gain_sweep, measure_latency, threshold_decision,
)
from .knn import (
    KNN_MAGIC, MODE_PCA, MODE_STANDARDIZED, KnnModel, fit_standardizer,
    knn_grid_eval, knn_predict, knn_predict_batch, load_knn, save_knn,
)
from .pca import bootstrap_variance_quantiles, explained_variance_curve, fit_pca, project
from .spectrogram import build_dataset, load_dataset, save_dataset
from .svm import (
    SVM_MAGIC, KernelSpec, load_svm, save_svm, svm_decision_batch, svm_grid_eval, train_svm,
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, ContainerError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssbwatch", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="synthesize a labeled spectrogram dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True, help="output stem for the .spec/.csv files")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train a detector on a dataset")
    p.add_argument("--model", required=True, choices=("cnn", "knn", "svm"))
    p.add_argument("--dataset", required=True, help="dataset stem from gen-dataset")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", default=None, help="comma list of neighbor counts (knn)")
    p.add_argument("--kernel", default=None, help="kernel of the saved svm model")
    p.add_argument("--dims", default=None, help="component counts or 'full' (svm)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on the test split")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--tau", type=float, default=0.5, help="decision threshold in [0, 1]")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time single-sample classification")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gain-sweep", help="detector output vs jammer gain")
    p.add_argument("--config", default=None)
    p.add_argument("--model", required=True, help="trained cnn model file")
    p.add_argument("--gains-db", required=True, help="comma list of jammer gains in dB")
    p.add_argument("--samples-per-gain", type=int, default=40)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gain_sweep)

    p = sub.add_parser("pca-analyze", help="cumulative explained-variance curve")
    p.add_argument("--dataset", required=True)
    p.add_argument("--bootstrap", type=int, default=0,
                   help="bootstrap repetitions for a quantile band (0 = off)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_pca_analyze)

    p = sub.add_parser("init-config", help="write the annotated default config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_config)
    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_dataset(args) -> int:
    cfg = load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    dataset = build_dataset(cfg.radio, cfg.channel, cfg.spectrogram, cfg.counts(),
                            duty_cycle=cfg.duty_cycle, seed=seed,
                            jammer_noise=cfg.jammer_noise)
    paths = save_dataset(dataset, args.out)
    for split in ("train", "validation", "test"):
        print(f"{split}: {len(dataset.splits[split])} samples")
    print("wrote " + ", ".join(str(p) for p in paths))
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    dataset = load_dataset(args.dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    if args.model == "cnn":
        train_x, train_y = dataset.features_labels("train")
        val_x, val_y = dataset.features_labels("validation")
        tc = cfg.train_cnn
        if args.seed is not None:
            tc = TrainConfig(tc.batch_size, tc.learning_rate, tc.beta1, tc.beta2,
                             tc.patience, tc.consecutive_patience, tc.max_epochs, args.seed)
        model = build_detector(seed=tc.seed,
                               input_shape=(dataset.params.stack_depth,
                                            dataset.params.window_size, 1))
        history = train(model, train_x[..., None], train_y, val_x[..., None], val_y, tc)
        save_cnn(model, out)
        save_history_csv(history, f"{out}.history.csv")
        print(f"best epoch {history.best_epoch}, "
              f"final val loss {history.val_losses[history.best_epoch]:.6f}")
        print(f"wrote {out} and {out}.history.csv")
        return 0

    if args.model == "knn":
        k_values = [int(v) for v in args.k.replace(",", " ").split()] if args.k else cfg.k_values
        results = {mode: knn_grid_eval(dataset, k_values, mode)
                   for mode in (MODE_STANDARDIZED, MODE_PCA)}
        rpt.write_knn_table_csv(results, f"{out}.accuracy.csv")
        chosen = results[cfg.knn_mode]
        train_psd, train_y = dataset.averaged_psds("train")
        if cfg.knn_mode == MODE_STANDARDIZED:
            std = fit_standardizer(train_psd)
            model = KnnModel(std.apply(train_psd), train_y, chosen.best_k,
                             cfg.knn_mode, standardizer=std)
        else:
            pca = fit_pca(train_psd, n_components=min(8, len(train_psd) - 1, train_psd.shape[1]))
            model = KnnModel(project(pca, train_psd), train_y, chosen.best_k,
                             cfg.knn_mode, pca=pca)
        save_knn(model, out)
        print(f"best k on validation: {chosen.best_k} ({cfg.knn_mode})")
        print(f"wrote {out} and {out}.accuracy.csv")
        return 0

    # svm: accuracy grid for the table, then save the requested configuration
    dims = parse_dims(args.dims) if args.dims else cfg.svm_dims
    grid = svm_grid_eval(dataset, kernels=cfg.kernels, dims=dims, C=cfg.svm_C, tol=cfg.svm_tol)
    rpt.write_svm_table_csv(grid, f"{out}.accuracy.csv")
    kernel = args.kernel or "rbf"
    dim = dims[0]
    train_psd, train_y = dataset.averaged_psds("train")
    pca = None
    features = train_psd
    if dim != "full":
        pca = fit_pca(train_psd, n_components=int(dim))
        features = project(pca, train_psd)
    model = train_svm(features, train_y, KernelSpec(kind=kernel), C=cfg.svm_C, tol=cfg.svm_tol)
    model.pca = pca
    save_svm(model, out)
    print(f"saved {kernel} kernel on dim {dim} with {len(model.support_vectors)} support vectors")
    print(f"wrote {out} and {out}.accuracy.csv")
    return 0


def _load_any_model(path: str):
    magic = peek_magic(path)
    if magic == CNN_MAGIC:
        return "cnn", load_cnn(path)
    if magic == KNN_MAGIC:
        return "knn", load_knn(path)
    if magic == SVM_MAGIC:
        return "svm", load_svm(path)
    raise ContainerError(f"unrecognized model file magic {magic!r}")


def _test_scores(kind: str, model, dataset) -> tuple[np.ndarray, np.ndarray, bool]:
    """Scores on the test split; the flag says whether they live in [0, 1]."""
    if kind == "cnn":
        x, y = dataset.features_labels("test")
        return model.predict(x[..., None]), y, True
    psd, y = dataset.averaged_psds("test")
    features = model.preprocess(psd)
    if kind == "knn":
        _, fractions = knn_predict_batch(model, features)
        return fractions, y, True
    return svm_decision_batch(model, features), y, False


def cmd_eval(args) -> int:
    if not 0.0 <= args.tau <= 1.0:
        raise ValueError("--tau must lie in [0, 1]")
    kind, model = _load_any_model(args.model)
    dataset = load_dataset(args.dataset)
    out = _outdir(args)
    scores, labels, unit_interval = _test_scores(kind, model, dataset)

    doc = rpt.Report()
    meta = doc.section("meta")
    meta["command"] = "eval"
    meta["model_kind"] = kind
    meta["test_samples"] = len(labels)

    res = doc.section("results")
    if unit_interval:
        decisions = np.array([threshold_decision(s, args.tau) for s in scores])
    else:
        decisions = (scores >= 0.0).astype(np.int64)  # svm decides on its native sign
    res["tau"] = args.tau
    res["accuracy_percent"] = accuracy_percent(decisions, labels)
    benign, jammed = labels == 0, labels == 1
    if benign.any():
        res["p_fa"] = float(np.mean(decisions[benign] == 1))
    if jammed.any():
        res["p_md"] = float(np.mean(decisions[jammed] == 0))

    if unit_interval and benign.any() and jammed.any():
        curve = fa_md_curve(scores, labels)
        rpt.write_fa_md_csv(curve, out / "fa_md_curve.csv")
        rpt.plot_fa_md(curve, out / "fa_md_curve.png")
        res["curve_csv"] = "fa_md_curve.csv"
        res["curve_png"] = "fa_md_curve.png"

    doc.save(out / "report.txt")
    print(f"accuracy {res['accuracy_percent']:.3f}% at tau={args.tau}")
    print(f"wrote {out / 'report.txt'}")
    return 0


def _single_sample_classifier(kind: str, model, tau: float):
    """Callable timed by the benchmark: full per-sample pipeline after the spectrogram."""
    if kind == "cnn":
        return lambda values: classify(model, values, tau)
    if kind == "knn":
        def run_knn(values):
            psd = values.astype(np.float64).mean(axis=0)
            label, _ = knn_predict(model, model.preprocess(psd))
            return label
        return run_knn

    def run_svm(values):
        psd = values.astype(np.float64).mean(axis=0)
        feature = model.preprocess(psd)
        return 1 if svm_decision_batch(model, feature[None, :])[0] >= 0.0 else 0
    return run_svm


def cmd_bench(args) -> int:
    kind, model = _load_any_model(args.model)
    dataset = load_dataset(args.dataset)
    out = _outdir(args)
    specs = dataset.splits["test"] or dataset.splits["train"]
    if not specs:
        raise ValueError("dataset has no samples to benchmark with")
    inputs = [s.values for s in specs]

    classifier = _single_sample_classifier(kind, model, args.tau)
    cdf = measure_latency(classifier, inputs, trials=args.trials)

    rpt.write_latency_csv(cdf, out / "latency_cdf.csv")
    rpt.plot_latency_cdf({kind: cdf}, out / "latency_cdf.png")
    doc = rpt.Report()
    meta = doc.section("meta")
    meta["command"] = "bench"
    meta["model_kind"] = kind
    meta["trials"] = args.trials
    res = doc.section("latency_seconds")
    res["p50"] = cdf.percentile(0.50)
    res["p95"] = cdf.percentile(0.95)
    res["p99"] = cdf.percentile(0.99)
    res["min"] = float(cdf.samples[0])
    res["max"] = float(cdf.samples[-1])
    for i, warning in enumerate(cdf.warnings):
        doc.section("warnings")[f"w{i}"] = warning
    doc.save(out / "report.txt")
    print(f"p95 classification time: {res['p95'] * 1e3:.3f} ms over {args.trials} trials")
    print(f"wrote {out / 'report.txt'}")
    return 0


def cmd_gain_sweep(args) -> int:
    cfg = load_config(args.config)
    kind, model = _load_any_model(args.model)
    if kind != "cnn":
        raise ValueError("gain-sweep expects a trained cnn model")
    gains = [float(v) for v in args.gains_db.replace(",", " ").split()]
    if not gains:
        raise ValueError("--gains-db must list at least one value")
    out = _outdir(args)
    seed = cfg.seed if args.seed is None else args.seed
    result = gain_sweep(cfg.radio, cfg.channel, gains, model,
                        samples_per_gain=args.samples_per_gain,
                        seed=seed, params=cfg.spectrogram, duty_cycle=cfg.duty_cycle)
    rpt.write_gain_sweep_csv(result, out / "gain_sweep.csv")
    rpt.plot_gain_sweep(result, out / "gain_sweep.png")
    doc = rpt.Report()
    doc.section("meta")["command"] = "gain-sweep"
    sec = doc.section("p90_output")
    for g, p in zip(result.gains_db, result.p90):
        sec[f"gain_{g:+.1f}_db"] = p
    doc.save(out / "report.txt")
    print("p90 per gain: " + ", ".join(f"{g:+.0f} dB -> {p:.3f}"
                                       for g, p in zip(result.gains_db, result.p90)))
    print(f"wrote {out / 'report.txt'}")
    return 0


def cmd_pca_analyze(args) -> int:
    dataset = load_dataset(args.dataset)
    out = _outdir(args)
    psd, _ = dataset.averaged_psds("train")
    full = min(len(psd) - 1, psd.shape[1])
    model = fit_pca(psd, n_components=full)
    curve = explained_variance_curve(model)
    low = high = None
    if args.bootstrap > 0:
        low, high = bootstrap_variance_quantiles(psd, repeats=args.bootstrap)
    rpt.write_variance_csv(curve, out / "explained_variance.csv", low, high)
    rpt.plot_variance_curve(curve, out / "explained_variance.png", low, high)
    doc = rpt.Report()
    doc.section("meta")["command"] = "pca-analyze"
    sec = doc.section("components_needed")
    for target in (0.90, 0.95, 0.98, 0.985, 0.99):
        needed = int(np.searchsorted(curve, target) + 1)
        sec[f"for_{target:.3f}"] = needed
    doc.save(out / "report.txt")
    print(f"components for 98% variance: {sec['for_0.980']}")
    print(f"wrote {out / 'report.txt'}")
    return 0


def cmd_init_config(args) -> int:
    write_default_config(args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
