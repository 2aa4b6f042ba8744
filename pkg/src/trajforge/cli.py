"""Command-line entry point: ``trajforge <stage> --config PATH``.

Stages read and write JSONL artifacts under the output directory, one
subdirectory per stage, so each can be rerun on its own::

    rollout   -> rollout/{trajectories,D_rej}.jsonl, manifest.json
    reflect   -> reflect/{D_L,loops}.jsonl, manifest.json
    branch    -> branch/{trajectories,deliberation,D_B}.jsonl, manifest.json
    rollback  -> rollback/{D_R,report}.jsonl, manifest.json
    curate    -> curate/{D_L_c,D_B_c,D_R_c}.jsonl (+ .manifest.json each)
    export    -> export/<dataset>.sft.jsonl, <dataset>.manifest.json
    eval      -> eval/report.json, eval/table.txt
    stats     -> stats/stats.json, stats/tables.txt

Exit status: 0 on success, 1 when some queries or variants failed (see the
manifests), 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from functools import cached_property
from pathlib import Path

from .backends import make_backend
from .branch import build_branch_set
from .config import PipelineConfig, load_config
from .curate import CurationDataset, build_pipeline_datasets, export_sft
from .env import SimulatedWeb
from .errors import ConfigError, TrajforgeError
from .evalkit import cost_ledger, delta_L, format_cost_ledger, format_success_tables, success_table, token_stats
from .judges import ModelJudge, RuleJudge
from .model import read_queries, read_trajectories, write_jsonl, write_trajectories
from .reflect import build_reflection_set
from .rollback import build_rollback_set
from .rollout import RolloutConfig, rejection_sample, run_episode, self_assess

log = logging.getLogger("trajforge")

STAGES = ("rollout", "reflect", "branch", "rollback", "curate", "export", "eval", "stats")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


class Pipeline:
    def __init__(self, cfg: PipelineConfig, jobs: int = 1):
        self.cfg = cfg
        self.jobs = jobs
        self.out = cfg.output_dir

    @cached_property
    def web(self) -> SimulatedWeb:
        try:
            return SimulatedWeb.from_dir(self.cfg.sites_dir)
        except TrajforgeError as exc:
            raise ConfigError(str(exc), "sites_dir") from None

    @cached_property
    def queries(self):
        try:
            qs = read_queries(self.cfg.queries)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc), "queries") from None
        for q in qs:
            if q.site not in self.web.sites:
                raise ConfigError(f"query {q.query_id!r} names unknown site {q.site!r}", "queries")
        return qs

    @cached_property
    def backends(self) -> dict:
        return {role: make_backend(bc, self.cfg.base_dir) for role, bc in self.cfg.backends.items()}

    @cached_property
    def judge(self):
        return RuleJudge(self.web) if self.cfg.judge == "rule_based" else ModelJudge(self.backends["judge"])

    @property
    def rollout_cfg(self) -> RolloutConfig:
        return RolloutConfig(max_steps=self.cfg.max_steps, clip_k=self.cfg.clip_k, judge=self.cfg.judge)

    def stage_dir(self, name: str) -> Path:
        d = self.out / name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def load_dataset(self, stage: str, name: str) -> CurationDataset:
        path = self.out / stage / f"{name}.jsonl"
        if not path.exists():
            raise ConfigError(f"{path} not found; run the '{stage}' stage first", "output_dir")
        return CurationDataset.load(path, name)

    # --- stages --------------------------------------------------------------

    def rollout(self) -> int:
        d = self.stage_dir("rollout")
        backend, cfg = self.backends["policy"], self.rollout_cfg
        res = rejection_sample(self.queries, lambda q: run_episode(self.web, backend, q, cfg), self.judge, self.jobs)
        write_trajectories(d / "trajectories.jsonl", res.trajectories)
        res.dataset.save(d / "D_rej.jsonl")
        _write_json(d / "manifest.json", res.manifest())
        log.info("rollout: %d/%d queries kept", len(res.dataset), len(self.queries))
        return 1 if res.errors else 0

    def reflect(self, refine_all: bool = False) -> int:
        d = self.stage_dir("reflect")
        pool = read_trajectories(self.out / "rollout" / "trajectories.jsonl")
        name = "D_L_hat" if refine_all else "D_L"
        res = build_reflection_set(pool, self.judge, self.backends["verbalizer"], self.web, refine_all, self.jobs, name)
        res.dataset.save(d / f"{name}.jsonl")
        write_jsonl(d / ("loops_all.jsonl" if refine_all else "loops.jsonl"), res.reports)
        _write_json(d / f"{'manifest_hat' if refine_all else 'manifest'}.json", {**res.dataset.manifest(), "total_tokens": res.tokens})
        log.info("reflect: %d trajectories kept", len(res.dataset))
        return 1 if any(r["outcome"].endswith("_error") for r in res.reports) else 0

    def branch(self) -> int:
        d = self.stage_dir("branch")
        res = build_branch_set(
            self.queries, self.web, self.backends, self.judge, self.rollout_cfg, self.cfg.branch_k, self.cfg.sim_depth, self.jobs
        )
        write_trajectories(d / "trajectories.jsonl", res.trajectories)
        write_jsonl(d / "deliberation.jsonl", res.log)
        res.dataset.save(d / "D_B.jsonl")
        _write_json(d / "manifest.json", {**res.manifest(), "total_tokens": res.tokens})
        log.info("branch: %d/%d queries kept", len(res.dataset), len(self.queries))
        return 1 if res.errors else 0

    def rollback(self) -> int:
        d = self.stage_dir("rollback")
        pool = [*self.load_dataset("rollout", "D_rej"), *self.load_dataset("reflect", "D_L"), *self.load_dataset("branch", "D_B")]
        res = build_rollback_set(
            pool, self.cfg.rollback_n, self.backends, self.judge, self.web, self.cfg.seed, self.cfg.rollback_mode, self.cfg.clip_k
        )
        res.dataset.save(d / "D_R.jsonl")
        write_jsonl(d / "report.jsonl", res.reports)
        _write_json(d / "manifest.json", {**res.dataset.manifest(), "outcomes": res.counts(), "total_tokens": res.tokens})
        log.info("rollback: %d variants kept", len(res.dataset))
        return 1 if res.counts().get("error") else 0

    def curate(self) -> int:
        d = self.stage_dir("curate")
        chain = build_pipeline_datasets(
            self.load_dataset("rollout", "D_rej"),
            self.load_dataset("reflect", "D_L"),
            self.load_dataset("branch", "D_B"),
            self.load_dataset("rollback", "D_R"),
        )
        for name, ds in chain.items():
            ds.save(d / f"{name}.jsonl")
            _write_json(d / f"{name}.manifest.json", ds.manifest())
        log.info("curate: %s", ", ".join(f"{k}={len(v)}" for k, v in chain.items()))
        return 0

    def export(self, dataset: str = "D_R_c") -> int:
        d = self.stage_dir("export")
        stage = {"D_rej": "rollout", "D_L": "reflect", "D_B": "branch", "D_R": "rollback"}.get(dataset, "curate")
        ds = self.load_dataset(stage, dataset)
        n = write_jsonl(d / f"{dataset}.sft.jsonl", (r.to_chat() for r in export_sft(ds, self.cfg.clip_k)))
        _write_json(d / f"{dataset}.manifest.json", {"dataset": dataset, "records": n, "trajectories": len(ds), "clip_k": self.cfg.clip_k})
        log.info("export: %d records from %s", n, dataset)
        return 0

    def eval(self) -> int:
        d = self.stage_dir("eval")
        qmap = {q.query_id: q for q in self.queries}
        agents = {"self": self.out / "rollout" / "trajectories.jsonl", "branch": self.out / "branch" / "trajectories.jsonl"}
        tables, per_query, failures = {}, {}, 0
        for agent, path in agents.items():
            if not path.exists():
                continue
            counts: dict[str, list[int]] = {}
            scores = {}
            for traj in read_trajectories(path):
                q = qmap[traj.query_id]
                try:
                    s = self_assess(traj, q, self.judge)
                except TrajforgeError as exc:
                    log.warning("eval: %s/%s: %s", agent, q.query_id, exc)
                    failures += 1
                    s = 0.0
                scores[q.query_id] = s
                c = counts.setdefault(q.site, [0, 0])
                c[0] += int(s == 1.0)
                c[1] += 1
            for q in self.queries:
                if q.query_id not in scores:
                    counts.setdefault(q.site, [0, 0])[1] += 1
            tables[agent] = success_table({site: tuple(v) for site, v in sorted(counts.items())})
            per_query[agent] = scores
        report = {
            agent: {"rates": {k: str(v) for k, v in t.rates.items()}, "overall": str(t.overall), "counts": t.counts, "scores": per_query[agent]}
            for agent, t in tables.items()
        }
        _write_json(d / "report.json", report)
        (d / "table.txt").write_text(format_success_tables(tables), encoding="utf-8")
        return 1 if failures else 0

    def stats(self) -> int:
        d = self.stage_dir("stats")
        roll = _read_json(self.out / "rollout" / "manifest.json")
        br = _read_json(self.out / "branch" / "manifest.json")
        result: dict = {}
        tables = []
        for agent, man in (("self", roll), ("branch", br)):
            toks = list(man["tokens"].values())
            if toks:
                ts = token_stats(toks)
                result.setdefault("token_stats", {})[agent] = {"mean": ts.mean, "median": ts.median, "count": ts.count}
        self_lens = {t.query_id: len(t) for t in read_trajectories(self.out / "rollout" / "trajectories.jsonl")}
        br_lens = {t.query_id: len(t) for t in read_trajectories(self.out / "branch" / "trajectories.jsonl")}
        both = [qid for qid in self_lens if roll["scores"].get(qid) == 1.0 and br["scores"].get(qid) == 1.0 and qid in br_lens]
        dl = delta_L([(br_lens[q], self_lens[q]) for q in both])
        result["delta_L"] = {
            "pairs": len(both),
            "values": list(dl.values),
            "nonzero_count": dl.nonzero_count,
            "mean": dl.mean,
            "median": dl.median,
            "defined": dl.defined,
        }
        phases = {}
        for phase, stage in (("reflection", "reflect"), ("branching", "branch"), ("rollback", "rollback")):
            path = self.out / stage / "manifest.json"
            if path.exists():
                phases[phase] = int(_read_json(path)["total_tokens"])
        ledger = cost_ledger(phases, self.cfg.price_per_token)
        result["cost_ledger"] = ledger.to_dict()
        tables.append(format_cost_ledger(ledger))
        _write_json(d / "stats.json", result)
        (d / "tables.txt").write_text("\n".join(tables), encoding="utf-8")
        return 0

    def run(self, name: str, args) -> int:
        if name == "reflect":
            return self.reflect(getattr(args, "refine_all", False))
        if name == "export":
            return self.export(getattr(args, "dataset", None) or "D_R_c")
        return getattr(self, name)()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trajforge", description="Curate reasoning trajectories for web agents.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path, help="pipeline config JSON")
        sp.add_argument("--jobs", type=int, default=1, help="concurrent episodes (default 1)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", type=Path, default=None, help="override the output directory")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        return sp

    for name in STAGES:
        sp = common(sub.add_parser(name, help=f"run the {name} stage"))
        if name == "reflect":
            sp.add_argument("--refine-all", action="store_true", help="re-verbalize loop-free trajectories too")
        if name == "export":
            sp.add_argument("--dataset", default="D_R_c", help="dataset to export (default D_R_c)")
    sp = common(sub.add_parser("all", help="run every stage in order"))
    sp.add_argument("--dataset", default="D_R_c", help="dataset to export (default D_R_c)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, output_dir=args.out)
        if args.jobs < 1:
            raise ConfigError("must be >= 1", "--jobs")
        pipe = Pipeline(cfg, args.jobs)
        stages = STAGES if args.command == "all" else (args.command,)
        status = 0
        for name in stages:
            status = max(status, pipe.run(name, args))
        return status
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
