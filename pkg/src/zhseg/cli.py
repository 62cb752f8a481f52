"""Command-line entry point: one binary, subcommand per task.

Exit codes follow sysexits-lite: 0 success, 2 runtime or IO failure,
64 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import bmes_decode, dataset_stats, load_char_map, load_corpus
from .decode import DecoderConfig, Pipeline, pcrf_decode, softmax_decode, viterbi
from .emission import (
    TransitionMatrix,
    load_emissions,
    load_model,
    save_model,
    train_perceptron,
)
from .errors import LengthMismatch, SegError, Utf8Error
from .evaluate import bench_throughput, dataset_distance, f1_score, map_sentences
from .lm import load_arpa, save_arpa, train_lm

SPEED_FLOOR_KB_S = 68.0


@dataclass
class RunConfig:
    subcommand: str
    input: str | None = None
    output: str | None = None
    lm_path: str | None = None
    model_path: str | None = None
    emissions_path: str | None = None
    char_map: str | None = None
    gold: str | None = None
    pred: str | None = None
    train: str | None = None
    test: str | None = None
    lm_weight: float = 0.1
    beam: int | None = 8
    decoder: str = "crf"
    order: int = 2
    min_count: int = 1
    epochs: int = 5
    seed: int = 42
    threads: int | list[int] = 1
    batch: int | list[int] = 1
    runs: int = 3
    legality: bool = True


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; remap to 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(64, f"{self.prog}: error: {message}\n")


def _beam_arg(value: str):
    if value.lower() == "exhaustive":
        return None
    try:
        iv = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("beam must be an integer or 'exhaustive'")
    if iv < 1:
        raise argparse.ArgumentTypeError("beam must be >= 1 or 'exhaustive'")
    return iv


def _nonneg_float(value: str) -> float:
    try:
        fv = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}")
    if fv < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return fv


def _pos_int(value: str) -> int:
    try:
        iv = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}")
    if iv < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return iv


def _int_list(value: str) -> list[int]:
    out = []
    for part in value.split(","):
        out.append(_pos_int(part.strip()))
    return out


def _default_threads() -> int:
    raw = os.environ.get("SEG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zhseg", description="Chinese word segmentation toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("train-lm", help="train an n-gram language model, write ARPA")
    p.add_argument("--input", required=True, help="segmented corpus, words joined by spaces")
    p.add_argument("--output", required=True, help="ARPA destination")
    p.add_argument("--order", type=int, choices=range(2, 6), default=2)
    p.add_argument("--min-count", type=_pos_int, default=1)
    p.add_argument("--char-map", default=None)

    p = sub.add_parser("train-tagger", help="train the emission model")
    p.add_argument("--input", required=True, help="segmented corpus")
    p.add_argument("--output", required=True, help="model TSV destination")
    p.add_argument("--epochs", type=_pos_int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--char-map", default=None)

    p = sub.add_parser("segment", help="segment raw text, one sentence per line")
    p.add_argument("--input", default=None, help="raw text (default: stdin)")
    p.add_argument("--output", default=None, help="destination (default: stdout)")
    p.add_argument("--model", default=None)
    p.add_argument("--emissions", default=None, help="EEF score file in place of --model")
    p.add_argument("--lm", default=None, help="ARPA language model (pcrf)")
    p.add_argument("--decoder", choices=("softmax", "crf", "pcrf"), default="crf")
    p.add_argument("--lambda", dest="lm_weight", type=_nonneg_float, default=0.1)
    p.add_argument("--beam", type=_beam_arg, default=8)
    p.add_argument("--no-legality", action="store_true")
    p.add_argument("--threads", type=_pos_int, default=None)
    p.add_argument("--batch", type=_pos_int, default=1)
    p.add_argument("--char-map", default=None)

    p = sub.add_parser("eval", help="score predicted segmentation against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)

    p = sub.add_parser("bench", help="measure segmentation throughput")
    p.add_argument("--input", required=True, help="raw text corpus")
    p.add_argument("--model", default=None)
    p.add_argument("--emissions", default=None)
    p.add_argument("--lm", default=None)
    p.add_argument("--decoder", choices=("softmax", "crf", "pcrf"), default="crf")
    p.add_argument("--lambda", dest="lm_weight", type=_nonneg_float, default=0.1)
    p.add_argument("--beam", type=_beam_arg, default=8)
    p.add_argument("--no-legality", action="store_true")
    p.add_argument("--threads", type=_int_list, default=None)
    p.add_argument("--batch", type=_int_list, default=[1])
    p.add_argument("--runs", type=_pos_int, default=3)

    p = sub.add_parser("stats", help="corpus statistics and dataset distance")
    p.add_argument("--input", default=None, help="single segmented corpus")
    p.add_argument("--train", default=None)
    p.add_argument("--test", default=None)

    return parser


def _to_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=args.subcommand)
    mapping = {
        "input": "input",
        "output": "output",
        "lm": "lm_path",
        "model": "model_path",
        "emissions": "emissions_path",
        "char_map": "char_map",
        "gold": "gold",
        "pred": "pred",
        "train": "train",
        "test": "test",
        "lm_weight": "lm_weight",
        "beam": "beam",
        "decoder": "decoder",
        "order": "order",
        "min_count": "min_count",
        "epochs": "epochs",
        "seed": "seed",
        "batch": "batch",
        "runs": "runs",
    }
    for src, dst in mapping.items():
        if hasattr(args, src) and getattr(args, src) is not None:
            setattr(cfg, dst, getattr(args, src))
    if hasattr(args, "no_legality"):
        cfg.legality = not args.no_legality
    if hasattr(args, "threads"):
        if args.threads is None:
            cfg.threads = [_default_threads()] if args.subcommand == "bench" else _default_threads()
        else:
            cfg.threads = args.threads
    return cfg


def _validate(parser: argparse.ArgumentParser, cfg: RunConfig) -> None:
    if cfg.subcommand in ("segment", "bench"):
        if cfg.decoder == "pcrf" and not cfg.lm_path:
            parser.error("--decoder pcrf requires --lm")
        if not cfg.model_path and not cfg.emissions_path:
            parser.error("one of --model or --emissions is required")
    if cfg.subcommand == "segment" and cfg.emissions_path and cfg.input:
        parser.error("--emissions already carries its text; drop --input")
    if cfg.subcommand == "stats":
        if not cfg.input and not (cfg.train and cfg.test):
            parser.error("give --input, or both --train and --test")


# -- helpers ---------------------------------------------------------------


def _read_bytes(path: str | None) -> bytes:
    if path is None:
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _read_lines(path: str | None) -> list[str]:
    """Raw input lines (UTF-8, LF or CRLF); None reads stdin."""
    data = _read_bytes(path)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise Utf8Error(data[: exc.start].count(0x0A) + 1) from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln.rstrip("\r") for ln in lines]


def _read_lines_lenient(path: str | None) -> list[tuple[bool, str]]:
    """Like _read_lines but decodes per line, so one bad line cannot take
    the stream down. Bad lines come back flagged, bytes replaced."""
    raw = _read_bytes(path).split(b"\n")
    if raw and raw[-1] == b"":
        raw.pop()
    out = []
    for chunk in raw:
        try:
            out.append((True, chunk.decode("utf-8").rstrip("\r")))
        except UnicodeDecodeError:
            out.append((False, chunk.decode("utf-8", errors="replace").rstrip("\r")))
    return out


def _open_out(path: str | None):
    if path is None:
        try:
            sys.stdout.reconfigure(encoding="utf-8", newline="\n")
        except (AttributeError, ValueError, OSError):
            pass
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _load_tagger(cfg: RunConfig):
    model = load_model(cfg.model_path) if cfg.model_path else None
    lm = load_arpa(cfg.lm_path) if cfg.lm_path else None
    return model, lm


def _decode_matrix(mat, transitions, lm, cfg: RunConfig, config: DecoderConfig):
    if cfg.decoder == "softmax":
        return softmax_decode(mat, config.enforce_legality)
    if cfg.decoder == "crf":
        return viterbi(mat, transitions, config.enforce_legality)
    return pcrf_decode(mat, transitions, lm, config=config)


@dataclass(frozen=True)
class _SafeCall:
    """Per-line wrapper: failures come back as values, never aborts."""

    pipeline: Pipeline

    def __call__(self, line: str):
        try:
            return True, self.pipeline(line)
        except Exception as exc:  # noqa: BLE001 - stream safety over purity
            return False, f"{type(exc).__name__}: {exc}"


# -- subcommands -----------------------------------------------------------


def cmd_train_lm(cfg: RunConfig) -> int:
    char_map = load_char_map(cfg.char_map) if cfg.char_map else None
    corpus = load_corpus(cfg.input, segmented=True, char_map=char_map)
    words = [bmes_decode(s) for s in corpus]
    model = train_lm(words, order=cfg.order, min_count=cfg.min_count)
    save_arpa(model, cfg.output)
    print(f"vocab {len(model.vocab)}")
    by_order = {}
    for gram in model.logprob:
        by_order[len(gram)] = by_order.get(len(gram), 0) + 1
    for k in sorted(by_order):
        print(f"{k}-grams {by_order[k]}")
    return 0


def cmd_train_tagger(cfg: RunConfig) -> int:
    char_map = load_char_map(cfg.char_map) if cfg.char_map else None
    corpus = load_corpus(cfg.input, segmented=True, char_map=char_map)
    model = train_perceptron(corpus, epochs=cfg.epochs, seed=cfg.seed)
    save_model(model, cfg.output)
    print(f"train-accuracy {model.train_accuracy:.4f}")
    return 0


def cmd_segment(cfg: RunConfig) -> int:
    config = DecoderConfig(
        lm_weight=cfg.lm_weight if cfg.decoder == "pcrf" else 0.0,
        beam_width=cfg.beam,
        enforce_legality=cfg.legality,
    )
    model, lm = _load_tagger(cfg)
    out, close_out = _open_out(cfg.output)
    try:
        if cfg.emissions_path:
            transitions = model.transitions if model else TransitionMatrix(np.zeros((4, 4)))
            for b, mat in enumerate(load_emissions(cfg.emissions_path), start=1):
                try:
                    words = list(_decode_matrix(mat, transitions, lm, cfg, config).words)
                    out.write(" ".join(words) + "\n")
                except Exception as exc:  # noqa: BLE001
                    print(f"zhseg: block {b}: {type(exc).__name__}: {exc}", file=sys.stderr)
                    out.write(mat.chars + "\n")
            return 0
        entries = _read_lines_lenient(cfg.input)
        safe = _SafeCall(Pipeline(model, lm, cfg.decoder, config))
        texts = [text for decoded, text in entries if decoded]
        results = iter(map_sentences(safe, texts, threads=cfg.threads, batch_size=cfg.batch))
        for lineno, (decoded, text) in enumerate(entries, start=1):
            if not decoded:
                print(f"zhseg: line {lineno}: invalid UTF-8; echoed unsegmented", file=sys.stderr)
                out.write(text + "\n")
                continue
            ok, payload = next(results)
            if ok:
                out.write(" ".join(payload) + "\n")
            else:
                print(f"zhseg: line {lineno}: {payload}; echoed unsegmented", file=sys.stderr)
                out.write(text + "\n")
        return 0
    finally:
        if close_out:
            out.close()
        else:
            out.flush()


def cmd_eval(cfg: RunConfig) -> int:
    gold = load_corpus(cfg.gold, segmented=True)
    pred = load_corpus(cfg.pred, segmented=True)
    try:
        report = f1_score(gold, pred)
    except LengthMismatch as exc:
        raise SegError(f"line {exc.sentence_index + 1}: {exc}") from None
    print(report.to_record())
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    model, lm = _load_tagger(cfg)
    if cfg.emissions_path and model is None:
        raise SegError("bench needs --model (EEF input has no reusable pipeline)")
    corpus = [ln for ln in _read_lines(cfg.input) if ln]
    config = DecoderConfig(
        lm_weight=cfg.lm_weight if cfg.decoder == "pcrf" else 0.0,
        beam_width=cfg.beam,
        enforce_legality=cfg.legality,
    )
    pipeline = Pipeline(model, lm, cfg.decoder, config)
    batches = cfg.batch if isinstance(cfg.batch, list) else [cfg.batch]
    threads = cfg.threads if isinstance(cfg.threads, list) else [cfg.threads]
    best = 0.0
    for b in batches:
        for t in threads:
            report = bench_throughput(pipeline, corpus, batch_size=b, threads=t, runs=cfg.runs)
            best = max(best, report.kb_per_s)
            print(report.to_record())
    verdict = "PASS" if best >= SPEED_FLOOR_KB_S else "FAIL"
    print(f"# minimum speed {SPEED_FLOOR_KB_S:g} KB/s: {verdict} (best {best:.1f} KB/s)")
    return 0


def cmd_stats(cfg: RunConfig) -> int:
    def record(path):
        stats = dataset_stats(load_corpus(path, segmented=True))
        print(
            json.dumps(
                {
                    "path": str(path),
                    "word_count": stats.word_count,
                    "phrase_count": stats.phrase_count,
                    "avg_sentence_length": stats.avg_sentence_length,
                    "sentence_count": stats.sentence_count,
                    "char_count": stats.char_count,
                },
                ensure_ascii=False,
            )
        )

    if cfg.input:
        record(cfg.input)
    if cfg.train and cfg.test:
        record(cfg.train)
        record(cfg.test)
        report = dataset_distance(
            load_corpus(cfg.train, segmented=True), load_corpus(cfg.test, segmented=True)
        )
        print(report.to_record())
    return 0


_DISPATCH = {
    "train-lm": cmd_train_lm,
    "train-tagger": cmd_train_tagger,
    "segment": cmd_segment,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _to_config(args)
        _validate(parser, cfg)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 64
    try:
        return _DISPATCH[cfg.subcommand](cfg)
    except BrokenPipeError:
        return 2
    except (SegError, OSError, ValueError) as exc:
        print(f"zhseg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
