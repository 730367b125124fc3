"""``ooro`` command line: ingest, predict, eval, graph, parse.

Exit codes: 0 ok, 2 usage or input error, 3 replay cache misconfiguration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from functools import partial
from pathlib import Path

from .annotations import (
    IngestReport,
    MalformedAnnotation,
    load_cocoa,
    load_instaorder,
    read_scenes,
    write_scenes,
)
from .core import to_signed
from .llm import API_KEY_ENV, EndpointConfig, ResponseCache
from .parser import LabelResolver, parse_response
from .report import (
    GPT_METHOD,
    METHODS,
    UnknownImageId,
    evaluate,
    export_dot,
    is_cache_miss,
    predict_baseline,
    predict_gpt,
    read_predictions,
    write_predictions,
    write_report,
)

logger = logging.getLogger("ooro")

EXIT_OK, EXIT_INPUT, EXIT_REPLAY = 0, 2, 3
MAX_CACHE_MISS_FRACTION = 0.10


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


def cmd_ingest(args: argparse.Namespace) -> int:
    if bool(args.cocoa) == bool(args.instaorder):
        raise CliError("give exactly one of --cocoa or --instaorder")
    if args.instaorder and not args.coco:
        raise CliError("--instaorder needs --coco (the COCO instances file)")
    report = IngestReport()
    try:
        if args.cocoa:
            scenes = load_cocoa(args.cocoa, report=report)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                scenes = load_instaorder(args.instaorder, args.coco, exclude_crowd=args.exclude_crowd, report=report)
    except (MalformedAnnotation, FileNotFoundError) as exc:
        raise CliError(str(exc)) from exc
    write_scenes(scenes, args.out)
    n_inst = sum(s.n for s in scenes)
    print(f"{len(scenes)} scenes, {n_inst} instances")
    if report.skipped_image_ids:
        print(f"skipped {len(report.skipped_image_ids)} record(s) with unmatched image ids", file=sys.stderr)
    if report.crowd_excluded:
        print(f"excluded {report.crowd_excluded} crowd instance(s)", file=sys.stderr)
    return EXIT_OK


def _read_scenes(path: str):
    try:
        return read_scenes(path)
    except FileNotFoundError as exc:
        raise CliError(f"scenes file not found: {path}") from exc
    except (MalformedAnnotation, ValueError) as exc:
        raise CliError(str(exc)) from exc


def cmd_predict(args: argparse.Namespace) -> int:
    scenes = _read_scenes(args.scenes)
    if args.method == GPT_METHOD:
        if not args.cache:
            raise CliError("--method gpt needs --cache")
        if args.live == args.replay_only:
            raise CliError("--method gpt needs exactly one of --live or --replay-only")
        if args.live and not args.model:
            raise CliError("--live needs --model")
        config = EndpointConfig(
            endpoint=args.endpoint,
            model=args.model or "unspecified",
            live=args.live,
            temperature=args.temperature,
        )
        if args.live and not config.resolved_key():
            logger.warning("%s is not set; sending requests without a credential", API_KEY_ENV)
        try:
            cache = ResponseCache(args.cache)
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        if args.replay_only and not args.model:
            models = cache.models()
            if len(models) != 1:
                raise CliError(f"--model is ambiguous for this cache (models: {models})", EXIT_REPLAY)
            config.model = models[0]
        images_dir = Path(args.images) if args.images else Path(args.scenes).parent
        fn = partial(predict_gpt, images_dir=images_dir, config=config, cache=cache,
                     include_bboxes=args.include_bboxes)
        with ThreadPoolExecutor(max_workers=args.jobs or 4) as pool:
            records = list(pool.map(fn, scenes))
        misses = sum(is_cache_miss(r) for r in records)
        if args.replay_only and scenes and misses / len(scenes) > MAX_CACHE_MISS_FRACTION:
            raise CliError(
                f"{misses} of {len(scenes)} scenes missed the replay cache; "
                "the cache does not match these scenes, prompt or model",
                EXIT_REPLAY,
            )
    else:
        fn = partial(predict_baseline, method=args.method)
        if args.jobs and args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                records = list(pool.map(fn, scenes, chunksize=16))
        else:
            records = [fn(s) for s in scenes]
    write_predictions(records, args.out)
    failed = sum(r.error is not None for r in records)
    print(f"{len(records)} predictions ({args.method}), {failed} failed")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    scenes = _read_scenes(args.scenes)
    try:
        records = read_predictions(args.pred)
    except FileNotFoundError as exc:
        raise CliError(f"predictions file not found: {args.pred}") from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    dataset = args.dataset or Path(args.scenes).stem
    try:
        result = evaluate(records, scenes, dataset, args.pair_mode)
    except UnknownImageId as exc:
        raise CliError(exc.args[0]) from exc
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = Path(args.out) if args.out else Path(args.pred).with_suffix(".report.json")
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    write_report(result, out, csv_path)
    r = result.primary
    print(
        f"{r.method} [{r.dataset}, {r.pair_mode}]: micro={r.micro_accuracy:.4f} "
        f"macro={r.macro_accuracy:.4f} all_zero_rate={r.all_zero_rate:.4f}"
    )
    return EXIT_OK


def cmd_graph(args: argparse.Namespace) -> int:
    scenes = {s.image_id: s for s in _read_scenes(args.scenes)}
    if args.image_id not in scenes:
        raise CliError(f"image id {args.image_id} is not in {args.scenes}")
    scene = scenes[args.image_id]
    if args.pred:
        matches = [r for r in read_predictions(args.pred) if r.image_id == args.image_id]
        if not matches:
            raise CliError(f"no prediction for image id {args.image_id} in {args.pred}")
        if matches[0].signed is None:
            raise CliError(f"prediction for image id {args.image_id} failed: {matches[0].error}")
        dot = export_dot(matches[0], scene)
    else:
        dot = export_dot(scene.ground_truth, scene, f"image_{scene.image_id}_gt")
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    text = Path(args.response).read_text(encoding="utf-8")
    categories = args.categories
    if Path(categories).is_file():
        categories = Path(categories).read_text(encoding="utf-8")
    rows = [row for row in csv.reader(categories.splitlines()) if row]
    names = [name.strip() for name in rows[0]] if rows else []
    if not names:
        raise CliError("empty category list")
    rel, report = parse_response(text, LabelResolver(names))
    json.dump({"signed": to_signed(rel).to_json(), "report": report.to_json()}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ooro", description="Occlusion order recovery: ingest, predict, evaluate.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="normalize COCOA or InstaOrder+COCO annotations into scenes JSONL")
    s.add_argument("--cocoa", help="COCOA amodal annotation JSON")
    s.add_argument("--instaorder", help="InstaOrder annotation JSON")
    s.add_argument("--coco", help="COCO instances JSON matching --instaorder")
    s.add_argument("--exclude-crowd", action="store_true", help="drop iscrowd instances (InstaOrder/COCO)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("predict", help="predict occlusion relations for every scene")
    s.add_argument("--scenes", required=True)
    s.add_argument("--method", required=True, choices=METHODS)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=None, help="parallel workers (default: 1 for baselines, 4 in-flight requests for gpt)")
    s.add_argument("--cache", help="record/replay cache JSONL (gpt)")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--live", action="store_true", help="query the endpoint on cache misses")
    mode.add_argument("--replay-only", action="store_true", help="answer only from the cache")
    s.add_argument("--model", help="model identifier sent to the endpoint")
    s.add_argument("--endpoint", default=EndpointConfig.endpoint, help="chat-completions URL")
    s.add_argument("--temperature", type=float, default=0.0)
    s.add_argument("--images", help="directory holding the scene images (default: next to --scenes)")
    s.add_argument("--include-bboxes", action="store_true", help="list instance boxes in the prompt")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="score predictions against scene ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--scenes", required=True)
    s.add_argument("--pair-mode", choices=["all", "gt-occluded"], default="all")
    s.add_argument("--dataset", help="dataset label for the report (default: scenes file stem)")
    s.add_argument("--out", help="report JSON path (default: <pred>.report.json)")
    s.add_argument("--csv", help="report CSV path (default: next to the JSON)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("graph", help="export one scene's occlusion order graph as DOT")
    s.add_argument("--scenes", required=True)
    s.add_argument("--image-id", type=int, required=True)
    s.add_argument("--pred", help="predictions JSONL (default: ground truth)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("parse", help="parse one raw model reply against a category CSV")
    s.add_argument("--response", required=True, help="text file with the model reply")
    s.add_argument("--categories", required=True, help="CSV line of display names, or a file holding it")
    s.set_defaults(func=cmd_parse)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ooro {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
