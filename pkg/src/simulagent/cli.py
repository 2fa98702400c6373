"""Command-line entry point.

Exit codes: 0 success, 1 internal error, 2 input/config error, 3 remote agent
failure.  Settings resolve as built-in defaults < ``--config`` TOML file <
command-line flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import subprocess
import sys
from pathlib import Path

from . import __version__
from .agents import (
    DEFAULT_INSTRUCTION,
    EchoAgent,
    OracleAgent,
    PromptTemplate,
    RemoteAgent,
    ScheduledPolicyAgent,
    WaitKWordAgent,
    format_instruction,
)
from .core import BoundaryConfig
from .errors import AgentUnavailable, SimulError
from .metrics import (
    LEVELS,
    EvalReport,
    average_lagging,
    corpus_bleu,
    corpus_hallucination_rate,
    difficulty_split,
    load_pharaoh,
    sentence_bleu,
)
from .orchestrator import (
    SessionLimits,
    load_transcripts,
    measure_speed,
    run_corpus,
    write_transcripts,
)
from .policy import (
    apply_boundary_restrictions,
    load_policy_traces,
    to_word_policy,
    validate_and_repair,
    write_word_policies,
)
from .sftgen import build_sft_corpus, read_jsonl_corpus, read_parallel, write_records
from .tokenization import parse_scheme, scheme_for, tokenize

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("simulagent")

ENDPOINT_ENV = "SIMULAGENT_ENDPOINT"

GLOBAL_DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "dry_run": False,
    "B": None,
    "T": None,
}

DEFAULTS = {
    "simulate": {
        "corpus": None, "src": None, "tgt": None,
        "agent": "oracle", "policy": "waitk", "k": 3,
        "traces": None, "src_scheme": "whitespace", "tgt_scheme": "whitespace",
        "template": None, "instruction": DEFAULT_INSTRUCTION,
        "src_lang": "German", "tgt_lang": "English",
        "endpoint": None, "timeout": 30.0, "max_new_tokens": 16, "retries": 0,
        "max_target_words": None, "out_dir": "simulate_out",
    },
    "convert-policy": {
        "corpus": None, "src": None, "tgt": None, "traces": None,
        "src_scheme": "whitespace", "tgt_scheme": "whitespace",
        "out": "word_policies.jsonl", "report": None,
    },
    "eval": {
        "hyp": None, "ref": None, "source": None, "policies": None,
        "transcripts": None, "hyp_align": None, "ref_align": None, "out": None,
    },
    "make-sft": {
        "corpus": None, "src": None, "tgt": None,
        "kind": "full", "k": 5, "template": None, "instruction": DEFAULT_INSTRUCTION,
        "src_lang": "German", "tgt_lang": "English",
        "sample_size": None, "samples_per_pair": 1, "out": "sft.jsonl",
    },
    "split-difficulty": {
        "alignments": None, "ids": None, "out_dir": "difficulty",
    },
}


class ConfigError(Exception):
    pass


def _version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _add_global(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global")
    g.add_argument("--config", help="TOML file; top-level keys or a [subcommand] table")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--jobs", type=int, help="parallel sessions (default 1)")
    g.add_argument("--dry-run", action="store_true", default=None,
                   help="validate inputs without writing outputs")
    g.add_argument("--B", type=int, help="minimum source words before the first target word")
    g.add_argument("--T", type=int, help="maximum source words before the first target word")
    g.add_argument("-v", "--verbose", action="store_true")


def _add_corpus(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", help='JSONL corpus with {"id","src","tgt"}')
    p.add_argument("--src", help="source sentences, one per line")
    p.add_argument("--tgt", help="target sentences, one per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulagent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run read/write sessions over a corpus and score them")
    _add_global(p)
    _add_corpus(p)
    p.add_argument("--agent", choices=["oracle", "echo", "remote"])
    p.add_argument("--policy", choices=["waitk", "trace", "full"])
    p.add_argument("--k", type=int, help="wait-k lag in words")
    p.add_argument("--traces", help="token-level policy traces (JSONL) for --policy trace")
    p.add_argument("--src-scheme", help="whitespace | chunk:N | map:PATH")
    p.add_argument("--tgt-scheme", help="whitespace | chunk:N | map:PATH")
    p.add_argument("--template", help="prompt template file")
    p.add_argument("--instruction")
    p.add_argument("--src-lang")
    p.add_argument("--tgt-lang")
    p.add_argument("--endpoint", help=f"remote generation URL (fallback: ${ENDPOINT_ENV})")
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-new-tokens", type=int)
    p.add_argument("--retries", type=int)
    p.add_argument("--max-target-words", type=int)
    p.add_argument("--out-dir")

    p = sub.add_parser("convert-policy", help="convert token-level traces to word-level policies")
    _add_global(p)
    _add_corpus(p)
    p.add_argument("--traces")
    p.add_argument("--src-scheme")
    p.add_argument("--tgt-scheme")
    p.add_argument("--out")
    p.add_argument("--report", help="write the repair report here instead of stderr")

    p = sub.add_parser("eval", help="compute AL, BLEU, HR, speed and difficulty breakdown")
    _add_global(p)
    p.add_argument("--hyp", help="hypotheses, one per line")
    p.add_argument("--ref", help="references, one per line")
    p.add_argument("--source", help="source sentences (needed for AL)")
    p.add_argument("--policies", help='JSONL with {"id","g"} per line (transcripts also work)')
    p.add_argument("--transcripts", help="transcripts JSONL; supplies policies and speed")
    p.add_argument("--hyp-align", help="pharaoh source-hypothesis alignments (for HR)")
    p.add_argument("--ref-align", help="pharaoh source-reference alignments (for difficulty)")
    p.add_argument("--out", help="report path (default: stdout)")

    p = sub.add_parser("make-sft", help="build a fine-tuning corpus")
    _add_global(p)
    _add_corpus(p)
    p.add_argument("--kind", choices=["full", "waitk"])
    p.add_argument("--k", type=int)
    p.add_argument("--template")
    p.add_argument("--instruction")
    p.add_argument("--src-lang")
    p.add_argument("--tgt-lang")
    p.add_argument("--sample-size", type=int)
    p.add_argument("--samples-per-pair", type=int)
    p.add_argument("--out")

    p = sub.add_parser("split-difficulty", help="split a test set into Easy/Medium/Hard")
    _add_global(p)
    p.add_argument("--alignments", help="pharaoh source-reference alignments")
    p.add_argument("--ids", help="sentence ids, one per line (default: 0-based line numbers)")
    p.add_argument("--out-dir")
    return parser


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(GLOBAL_DEFAULTS)
    cfg.update(DEFAULTS[command])
    allowed = set(cfg)
    if args.config:
        try:
            with open(args.config, "rb") as f:
                raw = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {args.config}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{args.config}: {e}") from e
        section = raw.pop(command, {})
        for name in list(raw):
            if name in DEFAULTS and isinstance(raw[name], dict):
                raw.pop(name)  # tables for other subcommands
        for source in (raw, section):
            for key, value in source.items():
                key = key.replace("-", "_")
                if key not in allowed:
                    raise ConfigError(f"unknown config key {key!r} for {command}")
                cfg[key] = value
    for key, value in vars(args).items():
        if key in allowed and value is not None:
            cfg[key] = value
    if (cfg["B"] is None) != (cfg["T"] is None):
        raise ConfigError("--B and --T must be given together")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be >= 1")
    return cfg


def _require_file(path, flag: str) -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{flag}: file not found: {p}")
    return p


def _load_corpus(cfg: dict):
    if cfg.get("corpus"):
        return read_jsonl_corpus(_require_file(cfg["corpus"], "--corpus"))
    if cfg.get("src") or cfg.get("tgt"):
        return read_parallel(_require_file(cfg["src"], "--src"), _require_file(cfg["tgt"], "--tgt"))
    raise ConfigError("a corpus is required: --corpus or --src/--tgt")


def _boundary(cfg: dict) -> BoundaryConfig | None:
    if cfg["B"] is None:
        return None
    try:
        return BoundaryConfig(cfg["B"], cfg["T"])
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _template(cfg: dict) -> PromptTemplate:
    if cfg.get("template"):
        return PromptTemplate.from_file(_require_file(cfg["template"], "--template"))
    return PromptTemplate()


def _parse_schemes(cfg: dict):
    try:
        return parse_scheme(cfg["src_scheme"]), parse_scheme(cfg["tgt_scheme"])
    except (ValueError, OSError) as e:
        raise ConfigError(str(e)) from e


def _convert_traces(pairs, traces, src_parsed, tgt_parsed, boundary):
    """Return ``[(id, WordPolicy)]`` in trace order plus a repair report by id."""
    index = {p.id: n for n, p in enumerate(pairs)}
    for t in traces:
        if t.sentence_id not in index:
            raise ConfigError(f"trace id {t.sentence_id!r} not found in corpus")
    trace_ids = {t.sentence_id for t in traces}
    for p in pairs:
        if p.id not in trace_ids:
            raise ConfigError(f"corpus id {p.id!r} has no trace")
    out, repairs = [], {}
    for t in traces:
        n = index[t.sentence_id]
        pair = pairs[n]
        src_tok = tokenize(pair.source_words, scheme_for(src_parsed, n))
        tgt_tok = tokenize(pair.target_words, scheme_for(tgt_parsed, n))
        h, report = validate_and_repair(t.h, src_tok.token_count)
        if report:
            repairs[t.sentence_id] = report.to_json()
        g = to_word_policy(h, src_tok, tgt_tok, pair.J)
        if boundary is not None:
            g = apply_boundary_restrictions(g, boundary, pair.J)
        out.append((t.sentence_id, g))
    return out, repairs


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_simulate(cfg: dict) -> int:
    pairs = _load_corpus(cfg)
    boundary = _boundary(cfg)
    template = _template(cfg)
    instruction = format_instruction(cfg["instruction"], cfg["src_lang"], cfg["tgt_lang"])

    if cfg["policy"] == "waitk":
        if cfg["k"] < 1:
            raise ConfigError("--k must be >= 1")
        make_pa = lambda n: WaitKWordAgent(cfg["k"])  # noqa: E731
    elif cfg["policy"] == "full":
        make_pa = lambda n: ScheduledPolicyAgent([pairs[n].J])  # noqa: E731
    else:
        traces = load_policy_traces(_require_file(cfg["traces"], "--traces"))
        src_parsed, tgt_parsed = _parse_schemes(cfg)
        converted, repairs = _convert_traces(pairs, traces, src_parsed, tgt_parsed, None)
        by_id = dict(converted)
        if repairs:
            logger.warning("repaired traces: %s", ", ".join(repairs))
        make_pa = lambda n: ScheduledPolicyAgent(by_id[pairs[n].id])  # noqa: E731

    if cfg["agent"] == "oracle":
        make_ta = lambda n: OracleAgent(pairs[n].target_words)  # noqa: E731
    elif cfg["agent"] == "echo":
        make_ta = lambda n: EchoAgent()  # noqa: E731
    else:
        endpoint = cfg["endpoint"] or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ConfigError(f"--endpoint or ${ENDPOINT_ENV} is required for the remote agent")
        cfg["endpoint"] = endpoint
        make_ta = lambda n: RemoteAgent(  # noqa: E731
            endpoint, template, max_new_tokens=cfg["max_new_tokens"],
            timeout=cfg["timeout"], retries=cfg["retries"],
        )

    if cfg["dry_run"]:
        print(f"dry run: {len(pairs)} sentence pairs, policy={cfg['policy']}, agent={cfg['agent']}")
        return 0

    limits = SessionLimits(boundary=boundary, max_target_words=cfg["max_target_words"])
    run = run_corpus(
        [(p.id, p.source_words) for p in pairs],
        lambda n: (make_pa(n), make_ta(n)),
        limits,
        jobs=cfg["jobs"],
        instruction=instruction,
    )
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_transcripts(out_dir / "transcripts.jsonl", run.transcripts)
    if run.error is not None:
        print(f"error: remote agent failed: {run.error} (attempts={run.error.attempts}); "
              f"partial transcripts in {out_dir / 'transcripts.jsonl'}", file=sys.stderr)
        return 3

    by_id = {p.id: p for p in pairs}
    hyps, refs, per_sentence, al_values = [], [], [], []
    for t in run.transcripts:
        pair = by_id[t.id]
        hyp = " ".join(t.target_words)
        ref = " ".join(pair.target_words)
        hyps.append(hyp)
        refs.append(ref)
        row = {"id": t.id, "g": list(t.g), "truncated": t.truncated,
               "BLEU": sentence_bleu(hyp, ref).score}
        if t.g:
            row["AL"] = average_lagging(t.g, pair.J, len(t.g))
            al_values.append(row["AL"])
        per_sentence.append(row)
    bleu = corpus_bleu(hyps, refs)
    report = EvalReport(
        AL=sum(al_values) / len(al_values) if al_values else None,
        BLEU=bleu.score,
        bleu_detail=_bleu_detail(bleu),
        per_sentence=per_sentence,
        config=_public_config(cfg),
        version=_version(),
    )
    if any(t.write_count for t in run.transcripts):
        speed = measure_speed(run.transcripts)
        report.speed, report.speed_reliable = speed.words_per_second, speed.reliable
    _write_json(out_dir / "report.json", report.to_json())
    print(f"AL={report.AL} BLEU={report.BLEU:.2f} -> {out_dir}")
    return 0


def _bleu_detail(bleu) -> dict:
    return {"precisions": list(bleu.precisions), "bp": bleu.brevity_penalty,
            "hyp_len": bleu.hyp_len, "ref_len": bleu.ref_len,
            "zero_precision": bleu.zero_precision}


def _public_config(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if k != "endpoint"} | {
        "endpoint": "<set>" if cfg.get("endpoint") else None
    }


def cmd_convert_policy(cfg: dict) -> int:
    pairs = _load_corpus(cfg)
    traces = load_policy_traces(_require_file(cfg["traces"], "--traces"))
    src_parsed, tgt_parsed = _parse_schemes(cfg)
    converted, repairs = _convert_traces(pairs, traces, src_parsed, tgt_parsed, _boundary(cfg))
    if cfg["dry_run"]:
        print(f"dry run: {len(converted)} policies, {len(repairs)} repaired")
        return 0
    write_word_policies(cfg["out"], converted)
    if cfg["report"]:
        _write_json(Path(cfg["report"]), repairs)
    elif repairs:
        print(json.dumps({"repairs": repairs}, sort_keys=True), file=sys.stderr)
    return 0


def _read_lines(path, flag) -> list[str]:
    return _require_file(path, flag).read_text(encoding="utf-8").splitlines()


def _load_policies(path) -> list[tuple[str, list[int]]]:
    out = []
    for lineno, line in enumerate(_read_lines(path, "--policies"), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append((str(obj["id"]), [int(x) for x in obj["g"]]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{path}:{lineno}: bad policy record ({e})") from e
    return out


def cmd_eval(cfg: dict) -> int:
    hyps = _read_lines(cfg["hyp"], "--hyp")
    refs = _read_lines(cfg["ref"], "--ref")
    if len(hyps) != len(refs):
        raise ConfigError(f"--hyp has {len(hyps)} lines but --ref has {len(refs)}")
    n = len(refs)
    sources = _read_lines(cfg["source"], "--source") if cfg["source"] else None
    transcripts = load_transcripts(_require_file(cfg["transcripts"], "--transcripts")) if cfg["transcripts"] else None
    policies = None
    if cfg["policies"]:
        policies = [g for _, g in _load_policies(cfg["policies"])]
    elif transcripts is not None:
        policies = [list(t.g) for t in transcripts]
    hyp_align = load_pharaoh(_require_file(cfg["hyp_align"], "--hyp-align")) if cfg["hyp_align"] else None
    ref_align = load_pharaoh(_require_file(cfg["ref_align"], "--ref-align")) if cfg["ref_align"] else None
    for name, items in (("--source", sources), ("--policies", policies),
                        ("--hyp-align", hyp_align), ("--ref-align", ref_align)):
        if items is not None and len(items) != n:
            raise ConfigError(f"{name} has {len(items)} entries but there are {n} references")
    if policies is not None and sources is None:
        raise ConfigError("--source is required to compute AL")
    if cfg["dry_run"]:
        print(f"dry run: {n} sentences")
        return 0

    rows = []
    for idx in range(n):
        row = {"id": str(idx), "BLEU": sentence_bleu(hyps[idx], refs[idx]).score}
        if policies is not None and policies[idx]:
            row["AL"] = average_lagging(policies[idx], len(sources[idx].split()), len(policies[idx]))
        if hyp_align is not None:
            I = len(hyps[idx].split())  # noqa: E741
            if I:
                row["HR"] = (I - len(hyp_align[idx].aligned_targets())) / I
        rows.append(row)

    def summarize(ids: list[int]) -> dict:
        out = {"count": len(ids), "BLEU": corpus_bleu([hyps[i] for i in ids], [refs[i] for i in ids]).score}
        als = [rows[i]["AL"] for i in ids if "AL" in rows[i]]
        if als:
            out["AL"] = sum(als) / len(als)
        if hyp_align is not None:
            items = [(len(hyps[i].split()), hyp_align[i]) for i in ids]
            if sum(I for I, _ in items):
                out["HR"] = corpus_hallucination_rate(items)
        return out

    overall = summarize(list(range(n)))
    bleu = corpus_bleu(hyps, refs)
    report = EvalReport(
        AL=overall.get("AL"), BLEU=bleu.score, HR=overall.get("HR"),
        bleu_detail=_bleu_detail(bleu), per_sentence=rows,
        config=_public_config(cfg), version=_version(),
    )
    if transcripts and any(t.write_count for t in transcripts):
        speed = measure_speed(transcripts)
        report.speed, report.speed_reliable = speed.words_per_second, speed.reliable
    if ref_align is not None:
        split = difficulty_split([(str(i), a) for i, a in enumerate(ref_align)])
        report.difficulty = {lvl: summarize([int(s) for s in split[lvl]]) for lvl in LEVELS}
    text = json.dumps(report.to_json(), indent=2, sort_keys=True, ensure_ascii=False)
    if cfg["out"]:
        Path(cfg["out"]).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def cmd_make_sft(cfg: dict) -> int:
    pairs = _load_corpus(cfg)
    template = _template(cfg)
    instruction = format_instruction(cfg["instruction"], cfg["src_lang"], cfg["tgt_lang"])
    records = build_sft_corpus(
        pairs, cfg["kind"], k=cfg["k"], template=template, instruction=instruction,
        seed=cfg["seed"], sample_size=cfg["sample_size"],
        samples_per_pair=cfg["samples_per_pair"],
    )
    if cfg["dry_run"]:
        print(f"dry run: {len(records)} records")
        return 0
    write_records(cfg["out"], records)
    return 0


def cmd_split_difficulty(cfg: dict) -> int:
    aligns = load_pharaoh(_require_file(cfg["alignments"], "--alignments"))
    if cfg["ids"]:
        ids = [line.strip() for line in _read_lines(cfg["ids"], "--ids") if line.strip()]
        if len(ids) != len(aligns):
            raise ConfigError(f"--ids has {len(ids)} entries but --alignments has {len(aligns)}")
    else:
        ids = [str(i) for i in range(len(aligns))]
    split = difficulty_split(list(zip(ids, aligns)))
    if cfg["dry_run"]:
        print(" ".join(f"{lvl}={len(split[lvl])}" for lvl in LEVELS))
        return 0
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for lvl in LEVELS:
        (out_dir / f"{lvl.lower()}.txt").write_text("".join(f"{i}\n" for i in split[lvl]), encoding="utf-8")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "convert-policy": cmd_convert_policy,
    "eval": cmd_eval,
    "make-sft": cmd_make_sft,
    "split-difficulty": cmd_split_difficulty,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except AgentUnavailable as e:
        print(f"error: remote agent failed: {e}", file=sys.stderr)
        return 3
    except (SimulError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        logger.exception("internal error")
        return 1


if __name__ == "__main__":
    sys.exit(main())
