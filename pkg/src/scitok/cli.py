"""Command-line pipeline over JSONL corpora.

Every command writes its output atomically and leaves a
``<output>.manifest.json`` beside it, from which ``scitok rerun`` reproduces
the exact same output.

Exit codes: 0 ok, 2 bad usage, 3 malformed or missing input, 4 a module
rejected the data (contract violation).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from itertools import islice
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Iterator

from . import __version__
from .codec import decode, encode
from .detector import DetectorConfig, segment
from .metrics import CharIdentityTokenizer, DynamicTokenizer, compare, measure
from .modality import CANONICAL_ALPHABETS, Modality
from .packer import CostModel, Document, build_plan, simulate_ranks
from .vocab import VocabularySet, assemble, default_vocabulary, train_bpe

logger = logging.getLogger("scitok")

BATCH = 1024


class InputError(Exception):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ":".join(str(x) for x in (path, line) if x is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line
        self._raw = message

    def __reduce__(self):
        return type(self), (self._raw, self.path, self.line)


@dataclass
class JobConfig:
    command: str
    input: str
    output: str
    config: str | None = None
    vocab: list[str] = field(default_factory=list)
    seed: int = 0
    workers: int = 1
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> JobConfig:
        return cls(**data)


# -- io helpers ---------------------------------------------------------------


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@contextmanager
def atomic_writer(path: str):
    """Yield a text handle on a temp file that replaces ``path`` on success."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            yield handle
        os.replace(tmp, target)
    except BaseException:
        os.unlink(tmp)
        raise


def read_jsonl(path: str, required: tuple[str, ...] = ()) -> Iterator[dict]:
    try:
        handle = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open input: {exc.strerror}", path) from None
    with handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise InputError(f"invalid JSON ({exc})", path, lineno) from None
            if not isinstance(record, dict):
                raise InputError("expected a JSON object", path, lineno)
            missing = [k for k in required if k not in record]
            if missing:
                raise InputError(f"missing field(s) {', '.join(missing)}", path, lineno)
            record["_line"] = lineno
            yield record


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


# -- per-record work (module level so worker processes can import it) ---------

_state: dict = {}


def _init_state(vocab_path: str | None, rules: DetectorConfig) -> None:
    _state["rules"] = rules
    _state["vs"] = VocabularySet.load(vocab_path) if vocab_path else None


def _detect_one(record: dict) -> str:
    seg = segment(_text(record), _state["rules"])
    return _dumps({"id": record["id"], "spans": [s.to_dict() for s in seg.spans]})


def _encode_one(record: dict) -> str:
    ts = encode(segment(_text(record), _state["rules"]), _state["vs"])
    return _dumps({"id": record["id"], "ids": ts.ids})


def _decode_one(record: dict) -> str:
    ids = record["ids"]
    if not isinstance(ids, list) or not all(isinstance(i, int) and i >= 0 for i in ids):
        raise InputError("ids must be a list of unsigned integers", None, record["_line"])
    return _dumps({"id": record["id"], "text": decode(ids, _state["vs"])})


def _text(record: dict) -> str:
    text = record["text"]
    if not isinstance(text, str):
        raise InputError("text must be a string", None, record["_line"])
    return text


def _map_records(
    cfg: JobConfig,
    fn: Callable[[dict], str],
    required: tuple[str, ...],
    rules: DetectorConfig,
    vocab_path: str | None,
) -> None:
    records = read_jsonl(cfg.input, required)
    with atomic_writer(cfg.output) as out:
        if cfg.workers <= 1:
            _init_state(vocab_path, rules)
            for record in records:
                out.write(fn(record) + "\n")
            return
        # Bounded batches keep memory flat; Pool.map preserves input order.
        with Pool(cfg.workers, initializer=_init_state, initargs=(vocab_path, rules)) as pool:
            while batch := list(islice(records, BATCH * cfg.workers)):
                for line in pool.map(fn, batch, chunksize=64):
                    out.write(line + "\n")


# -- commands -----------------------------------------------------------------


def _rules(cfg: JobConfig) -> DetectorConfig:
    if cfg.config is None:
        rules = DetectorConfig()
    else:
        try:
            rules = DetectorConfig.from_file(cfg.config)
        except OSError as exc:
            raise InputError(f"cannot read detector config: {exc.strerror}", cfg.config) from None
    if "enable_heuristics" in cfg.params:
        rules = DetectorConfig(
            rules.min_smiles_len, rules.min_fasta_len, rules.min_protein_len,
            bool(cfg.params["enable_heuristics"]),
        )
    return rules


def _one_vocab(cfg: JobConfig) -> str:
    if len(cfg.vocab) != 1:
        raise UsageError(f"{cfg.command} needs exactly one --vocab")
    return cfg.vocab[0]


def _load_vocab(path: str) -> VocabularySet:
    try:
        return VocabularySet.load(path)
    except OSError as exc:
        raise InputError(f"cannot read vocab: {exc.strerror}", path) from None
    except (json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"malformed vocab file ({exc})", path) from None


class UsageError(Exception):
    pass


def cmd_detect(cfg: JobConfig) -> None:
    _map_records(cfg, _detect_one, ("id", "text"), _rules(cfg), None)


def cmd_encode(cfg: JobConfig) -> None:
    path = _one_vocab(cfg)
    _load_vocab(path)
    _map_records(cfg, _encode_one, ("id", "text"), _rules(cfg), path)


def cmd_decode(cfg: JobConfig) -> None:
    path = _one_vocab(cfg)
    _load_vocab(path)
    _map_records(cfg, _decode_one, ("id", "ids"), DetectorConfig(), path)


def cmd_train_bpe(cfg: JobConfig) -> None:
    params = cfg.params
    try:
        modality = Modality(params["modality"])
        target_size = int(params["target_size"])
    except (KeyError, ValueError) as exc:
        raise UsageError(f"train-bpe needs --modality and --target-size ({exc})") from None
    rules = _rules(cfg)
    corpus = []
    for record in read_jsonl(cfg.input, ("text",)):
        text = _text(record)
        if params.get("from_spans"):
            seg = segment(text, rules)
            corpus.extend(text[s.start : s.end] for s in seg.spans if s.modality is modality)
        else:
            corpus.append(text)
    base = CANONICAL_ALPHABETS.get(modality, ())
    vocab = train_bpe(corpus, modality, target_size, cfg.seed, base_alphabet=base)
    if cfg.vocab:
        existing = _load_vocab(_one_vocab(cfg)).vocabularies
        vocabs = dict(existing)
    else:
        vocabs = {m: default_vocabulary(m) for m in Modality}
    vocabs[modality] = vocab
    vs = assemble(vocabs.values())
    with atomic_writer(cfg.output) as out:
        out.write(vs.to_json())
    logger.info("trained %d merges for %s", len(vocab.merges), modality.value)


def cmd_cr_bench(cfg: JobConfig) -> None:
    rules = _rules(cfg)
    dataset = [_text(r) for r in read_jsonl(cfg.input, ("text",))]
    names = cfg.params.get("names") or []
    wrap = Modality(cfg.params["wrap"]) if cfg.params.get("wrap") else None
    tokenizers = []
    for i, path in enumerate(cfg.vocab):
        name = names[i] if i < len(names) else Path(path).stem
        tokenizers.append(
            DynamicTokenizer(_load_vocab(path), rules, name, not cfg.params.get("no_specials"), wrap)
        )
    if cfg.params.get("identity"):
        tokenizers.append(CharIdentityTokenizer())
    if not tokenizers:
        raise UsageError("cr-bench needs at least one --vocab or --identity")
    reports = [measure(t, dataset) for t in tokenizers]
    result = {"reports": [r.to_dict() for r in reports]}
    table = None
    if len(reports) >= 2:
        table = compare(reports)
        result["comparison"] = table.to_dict()
        result["table"] = table.to_text()
    with atomic_writer(cfg.output) as out:
        out.write(json.dumps(result, sort_keys=True, indent=1) + "\n")
    if table is not None:
        with atomic_writer(cfg.output + ".txt") as out:
            out.write(table.to_text())
        sys.stdout.write(table.to_text())


def cmd_pack(cfg: JobConfig) -> None:
    p = cfg.params
    try:
        capacity, window, ranks = int(p["capacity"]), int(p["window"]), int(p["ranks"])
        cost_model = CostModel(p.get("cost_model", CostModel.PADDED_MAX.value))
    except (KeyError, ValueError) as exc:
        raise UsageError(f"pack needs --capacity, --window and --ranks ({exc})") from None
    rules = _rules(cfg)
    vs = _load_vocab(cfg.vocab[0]) if cfg.vocab else None
    docs = []
    for record in read_jsonl(cfg.input, ("id",)):
        if "length" in record:
            length = record["length"]
            if not isinstance(length, int):
                raise InputError("length must be an integer", cfg.input, record["_line"])
        elif "text" in record:
            if vs is None:
                raise UsageError("records carry text; pass --vocab to measure token lengths")
            length = len(encode(segment(_text(record), rules), vs).ids)
        else:
            raise InputError("record needs length or text", cfg.input, record["_line"])
        docs.append(Document(str(record["id"]), length))

    plan = build_plan(docs, capacity, window, cfg.seed, cost_model)
    baseline = build_plan(docs, capacity, window, cfg.seed, cost_model, balanced=False)
    with atomic_writer(cfg.output) as out:
        for i, bucket in enumerate(plan.buckets):
            out.write(_dumps(bucket.to_dict(i)) + "\n")
    stats = {
        "buckets": len(plan.buckets),
        "window": window,
        "ranks": ranks,
        "seed": cfg.seed,
        "cost_model": cost_model.value,
        "vlbs": simulate_ranks(plan, ranks).to_dict(),
        "unsorted": simulate_ranks(baseline, ranks).to_dict(),
    }
    with atomic_writer(cfg.output + ".stats.json") as out:
        out.write(json.dumps(stats, sort_keys=True, indent=1) + "\n")


HANDLERS = {
    "detect": cmd_detect,
    "train-bpe": cmd_train_bpe,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "cr-bench": cmd_cr_bench,
    "pack": cmd_pack,
}


def manifest_path(output: str) -> str:
    return output + ".manifest.json"


def write_manifest(cfg: JobConfig) -> None:
    inputs = [cfg.input, *cfg.vocab] + ([cfg.config] if cfg.config else [])
    manifest = {
        "tool": "scitok",
        "version": __version__,
        "config": cfg.to_dict(),
        "inputs": {p: file_sha256(p) for p in inputs},
    }
    with atomic_writer(manifest_path(cfg.output)) as out:
        out.write(json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def run(cfg: JobConfig) -> int:
    """Execute one job; return the process exit status."""
    try:
        if cfg.command not in HANDLERS:
            raise UsageError(f"unknown command {cfg.command!r}")
        HANDLERS[cfg.command](cfg)
        write_manifest(cfg)
    except UsageError as exc:
        return _fail(2, "usage", str(exc))
    except InputError as exc:
        return _fail(3, "malformed-input", str(exc), path=exc.path or cfg.input, line=exc.line)
    except (ValueError, KeyError) as exc:
        return _fail(4, "contract-violation", str(exc), kind=type(exc).__name__)
    return 0


def _fail(code: int, error: str, message: str, **extra) -> int:
    payload = {"error": error, "exit_code": code, "message": message, **extra}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Report usage errors as JSON like every other failure."""

    def error(self, message):
        _fail(2, "usage", f"{self.prog}: {message}")
        self.exit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scitok", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"scitok {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input", "--data", dest="input", required=True)
        p.add_argument("--output", "--out", dest="output", required=True)
        p.add_argument("--config", help="detector key=value config file")
        p.add_argument("--vocab", action="append", default=[], help="vocab JSON file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--no-heuristics", action="store_true")
        return p

    common(sub.add_parser("detect", help="emit modality spans per document"))
    p = common(sub.add_parser("train-bpe", help="train one modality's BPE vocabulary"))
    p.add_argument("--modality", required=True, choices=[m.value for m in Modality])
    p.add_argument("--target-size", type=int, required=True)
    p.add_argument("--from-spans", action="store_true", help="train on detected spans only")
    common(sub.add_parser("encode", help="text -> global token ids"))
    common(sub.add_parser("decode", help="global token ids -> text"))
    p = common(sub.add_parser("cr-bench", help="compression ratio benchmark"))
    p.add_argument("--name", action="append", default=[], help="label per --vocab")
    p.add_argument("--identity", action="store_true", help="add the char-identity baseline")
    p.add_argument("--no-specials", action="store_true", help="exclude tag tokens from counts")
    p.add_argument(
        "--wrap", choices=[m.value for m in Modality], help="score each document as one tagged span"
    )
    p = common(sub.add_parser("pack", help="VLBS packing plan"))
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--ranks", type=int, required=True)
    p.add_argument("--cost-model", choices=[c.value for c in CostModel], default="padded-max")

    p = sub.add_parser("rerun", help="repeat a job from its manifest")
    p.add_argument("manifest")
    return parser


def config_from_args(args: argparse.Namespace) -> JobConfig:
    params: dict = {}
    if args.no_heuristics:
        params["enable_heuristics"] = False
    if args.command == "train-bpe":
        params.update(modality=args.modality, target_size=args.target_size)
        if args.from_spans:
            params["from_spans"] = True
    elif args.command == "cr-bench":
        params.update(names=args.name, identity=args.identity)
        if args.no_specials:
            params["no_specials"] = True
        if args.wrap:
            params["wrap"] = args.wrap
    elif args.command == "pack":
        params.update(
            capacity=args.capacity, window=args.window, ranks=args.ranks, cost_model=args.cost_model
        )
    return JobConfig(
        command=args.command,
        input=args.input,
        output=args.output,
        config=args.config,
        vocab=list(args.vocab),
        seed=args.seed,
        workers=args.workers,
        params=params,
    )


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SCITOK_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "rerun":
        try:
            data = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            cfg = JobConfig.from_dict(data["config"])
            recorded = data["inputs"]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            return _fail(3, "malformed-input", f"bad manifest: {exc}", path=args.manifest)
        for path, digest in recorded.items():
            if os.path.exists(path) and file_sha256(path) != digest:
                logger.warning("input %s changed since the manifest was written", path)
    else:
        cfg = config_from_args(args)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
