"""Operator entry points: train, serve, synth, corpus, eval, revise.

Every artifact-producing command writes a JSON manifest next to its output
(config echo plus input hashes) so runs can be reproduced bit for bit.
Exit codes: 0 success, 1 usage, 2 environment/IO.
"""

from __future__ import annotations

import argparse
import asyncio
import hashlib
import json
import os
import signal
import sys
from dataclasses import asdict, dataclass

from . import __version__
from .checker import CHECKER_URL_ENV, CheckerConfig
from .completion import DEFAULT_NUCLEUS_P
from .evaluation import (
    AllTiesError,
    focus_experiment,
    focus_report,
    focus_report_json,
    focus_report_text,
    sign_test,
)
from .lm import DEFAULT_DISCOUNT, DEFAULT_ORDER, NGramLanguageModel, train_file
from .revision import RevisionSettings, machine_only_revise_with_stats
from .server import DEFAULT_PORT, Session, build_backend, serve
from .synthesis import attach_marks, format_completion_corpus, load_pairs, load_papers


@dataclass(frozen=True)
class Config:
    """Decode defaults; flags and the config file override them."""

    model: str | None = None
    corpus: str | None = None
    backend: str = "builtin"
    checker_url: str | None = None
    seed: int = 0
    beam_size: int = 15
    num_groups: int = 15
    strength: float = 1.0
    top_k: int = 8
    ppl_factor: float = 1.3
    nucleus_p: float = DEFAULT_NUCLEUS_P
    order: int = DEFAULT_ORDER
    discount: float = DEFAULT_DISCOUNT


class UsageError(Exception):
    pass


class EnvironmentProblem(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{lineno}: expected key = value")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise EnvironmentProblem(f"cannot read config file: {exc}") from exc
    return values


def _merged_config(args) -> Config:
    merged = asdict(Config())
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config)
        for key, raw in file_values.items():
            if key not in merged:
                raise UsageError(f"unknown config key {key!r}")
            current = merged[key]
            if isinstance(current, bool):
                merged[key] = raw.lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                merged[key] = int(raw)
            elif isinstance(current, float):
                merged[key] = float(raw)
            else:
                merged[key] = raw
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return Config(**merged)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(output: str, command: str, config: Config,
                    inputs: list[str], extra: dict) -> None:
    manifest = {
        "tool": f"draftforge {__version__}",
        "command": command,
        "config": asdict(config),
        "inputs": {path: _sha256(path) for path in inputs},
        **extra,
    }
    with open(output + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _load_model(config: Config) -> NGramLanguageModel:
    if config.model:
        if not os.path.isfile(config.model):
            raise EnvironmentProblem(f"model file not readable: {config.model}")
        try:
            return NGramLanguageModel.load(config.model)
        except (OSError, ValueError) as exc:
            raise EnvironmentProblem(f"cannot load model: {exc}") from exc
    if config.corpus:
        return _train_from_file(config)
    raise UsageError("either --model or --corpus is required")


def _train_from_file(config: Config) -> NGramLanguageModel:
    if not os.path.isfile(config.corpus):
        raise EnvironmentProblem(f"corpus file not readable: {config.corpus}")
    try:
        return train_file(config.corpus, order=config.order,
                          discount=config.discount)
    except (OSError, ValueError) as exc:
        raise EnvironmentProblem(f"training failed: {exc}") from exc


def _settings(config: Config) -> RevisionSettings:
    return RevisionSettings(beam_size=config.beam_size,
                            num_groups=config.num_groups,
                            strength=config.strength,
                            top_k=config.top_k,
                            ppl_factor=config.ppl_factor)


# --- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    config = _merged_config(args)
    if not config.corpus:
        raise UsageError("--corpus is required")
    model = _train_from_file(config)
    try:
        model.save(args.output)
    except OSError as exc:
        raise EnvironmentProblem(f"cannot write model: {exc}") from exc
    _write_manifest(args.output, "train", config, [config.corpus],
                    {"vocab_size": len(model.vocab)})
    print(f"trained order-{model.order} model on {config.corpus} "
          f"({len(model.vocab)} types) -> {args.output}")
    return 0


def cmd_serve(args) -> int:
    config = _merged_config(args)
    lm = _load_model(config)
    checker_config = CheckerConfig(url=config.checker_url)
    settings = _settings(config)
    backend = build_backend(config.backend, lm, settings)

    def session_factory() -> Session:
        return Session(backend=backend, lm=lm, checker_config=checker_config,
                       settings=settings, nucleus_p=config.nucleus_p,
                       diagnostics="deferred")

    async def run() -> None:
        try:
            server = await serve(session_factory, host=args.host, port=args.port)
        except OSError as exc:
            raise EnvironmentProblem(f"cannot listen on port {args.port}: {exc}")
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, stop.set)
            except NotImplementedError:
                pass
        port = next(iter(server.sockets)).getsockname()[1]
        print(f"listening on ws://{args.host}:{port}/teaspn", flush=True)
        await stop.wait()
        server.close()
        await server.wait_closed()

    asyncio.run(run())
    return 0


def cmd_synth(args) -> int:
    config = _merged_config(args)
    if not os.path.isfile(args.pairs):
        raise EnvironmentProblem(f"input not readable: {args.pairs}")
    pairs, skipped = load_pairs(args.pairs)
    counts = {"marked": 0, "ratio_exceeded": 0, "no_rewrites": 0,
              "skipped": skipped}
    try:
        with open(args.output, "w", encoding="utf-8") as fh:
            for pair in pairs:
                result = attach_marks(pair)
                counts[result.decision] += 1
                fh.write(result.text + "\n")
    except OSError as exc:
        raise EnvironmentProblem(f"cannot write output: {exc}") from exc
    _write_manifest(args.output, "synth", config, [args.pairs], {"counts": counts})
    unmarked = counts["ratio_exceeded"] + counts["no_rewrites"]
    print(f"marked {counts['marked']}, unmarked {unmarked}, "
          f"skipped {counts['skipped']} -> {args.output}")
    if skipped:
        print(f"warning: {skipped} malformed line(s) skipped", file=sys.stderr)
    return 0


def cmd_corpus(args) -> int:
    config = _merged_config(args)
    if not os.path.isfile(args.papers):
        raise EnvironmentProblem(f"input not readable: {args.papers}")
    try:
        papers = load_papers(args.papers)
        text = format_completion_corpus(papers, seed=config.seed)
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    except (OSError, KeyError, ValueError) as exc:
        raise EnvironmentProblem(f"corpus formatting failed: {exc}") from exc
    _write_manifest(args.output, "corpus", config, [args.papers],
                    {"papers": len(papers)})
    print(f"formatted {len(papers)} paper(s) -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    config = _merged_config(args)
    if not os.path.isfile(args.sentences):
        raise EnvironmentProblem(f"input not readable: {args.sentences}")
    lm = _load_model(config)
    backend = build_backend(config.backend, lm, _settings(config))
    with open(args.sentences, encoding="utf-8") as fh:
        sentences = [line.strip() for line in fh if line.strip()]
    if not sentences:
        raise UsageError("evaluation corpus is empty")
    result = focus_experiment(sentences, backend=backend, seed=config.seed,
                              k=args.k_best)
    pairs = [(p.r_marked, p.r_unmarked) for p in result.pairs]
    try:
        p_value = sign_test(pairs)
    except AllTiesError:
        p_value = None
    report = focus_report(result, p_value)
    if len(pairs) < 2:
        report["warning"] = "insufficient data: fewer than 2 scored sentences"
    try:
        with open(args.output + ".json", "w", encoding="utf-8") as fh:
            fh.write(focus_report_json(report))
        with open(args.output + ".txt", "w", encoding="utf-8") as fh:
            fh.write(focus_report_text(report))
    except OSError as exc:
        raise EnvironmentProblem(f"cannot write report: {exc}") from exc
    _write_manifest(args.output + ".json", "eval", config, [args.sentences],
                    {"n_pairs": len(pairs), "p_value": p_value})
    print(focus_report_text(report), end="")
    if "warning" in report:
        print(f"warning: {report['warning']}", file=sys.stderr)
    return 0


def cmd_revise(args) -> int:
    config = _merged_config(args)
    if not os.path.isfile(args.document):
        raise EnvironmentProblem(f"input not readable: {args.document}")
    lm = _load_model(config)
    settings = _settings(config)
    backend = build_backend(config.backend, lm, settings)
    with open(args.document, encoding="utf-8") as fh:
        document = fh.read()
    revised, changed, total = machine_only_revise_with_stats(
        document, backend, lm, settings)
    try:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(revised)
    except OSError as exc:
        raise EnvironmentProblem(f"cannot write output: {exc}") from exc
    _write_manifest(args.output, "revise", config, [args.document],
                    {"sentences": total, "changed": changed})
    print(f"revised {changed} of {total} sentence(s) -> {args.output}")
    return 0


# --- argument wiring ----------------------------------------------------------


def _add_shared(parser, *, model=True):
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, default=None)
    if model:
        parser.add_argument("--model", default=None, help="serialized model path")
        parser.add_argument("--corpus", default=None,
                            help="train on this text file instead of loading a model")
        parser.add_argument("--backend", default=None,
                            help="builtin | copy | external:<url>")
        parser.add_argument("--beam-size", dest="beam_size", type=int, default=None)
        parser.add_argument("--num-groups", dest="num_groups", type=int, default=None)
        parser.add_argument("--strength", type=float, default=None)
        parser.add_argument("--top-k", dest="top_k", type=int, default=None)
        parser.add_argument("--ppl-factor", dest="ppl_factor", type=float, default=None)


def make_parser() -> _Parser:
    parser = _Parser(prog="draftforge",
                     description="revision, completion, and checking tools")
    parser.add_argument("--version", action="version",
                        version=f"draftforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("train", help="train and serialize a model")
    _add_shared(p, model=False)
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--discount", type=float, default=None)
    p.add_argument("output")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("serve", help="run the protocol server")
    _add_shared(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--checker-url", dest="checker_url", default=None,
                   help=f"external checker endpoint (or ${CHECKER_URL_ENV})")
    p.add_argument("--nucleus-p", dest="nucleus_p", type=float, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="attach edit marks to draft/revision pairs")
    _add_shared(p, model=False)
    p.add_argument("pairs", help="tab-separated draft<TAB>revision lines")
    p.add_argument("output")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corpus", help="format the completion training corpus")
    _add_shared(p, model=False)
    p.add_argument("papers", help="JSON lines: {title, sections:[{name, paragraphs}]}")
    p.add_argument("output")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("eval", help="run the edit-focus experiment")
    _add_shared(p)
    p.add_argument("--k-best", dest="k_best", type=int, default=10)
    p.add_argument("sentences", help="one sentence per line")
    p.add_argument("output", help="report basename (.json and .txt added)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("revise", help="apply the top revision to every sentence")
    _add_shared(p)
    p.add_argument("document")
    p.add_argument("output")
    p.set_defaults(func=cmd_revise)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError:
        return 1
    except EnvironmentProblem as exc:
        print(f"draftforge: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
