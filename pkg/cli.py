import os
import sys
import json
import argparse

from models.negbin import FitOptions
from models.synth import ControlDistributions, SynthSpec, write_synthetic_corpus
from services import pipeline_service as pipeline
from services.corpus_service import emit_plot_data
from services.labeler_service import load_rules
from utils.config_utils import (
    DEFAULT_K,
    DEFAULT_MAX_ITER,
    DEFAULT_RULES_PATH,
    DEFAULT_SEED,
    DEFAULT_TOL,
    DEFAULT_WORKERS,
    EFFECT_METHODS,
    EVAL_MODELS,
    OUTPUT_FORMATS,
    RunConfig,
)
from utils.errors import ConfigError, LikeTallyError
from utils.file_utils import write_csv, write_json, write_manifest
from utils.log_utils import configure_logging, get_logger

logger = get_logger("cli")

ANALYSIS_COMMANDS = ("summarize", "label", "fit", "select", "effects", "rank", "plotdata")

# ---------------- Simulation defaults ----------------
SIM_CANDIDATE = "clinton"
SIM_TOPICS = ("trump", "economy", "wall_street", "women", "immigration")
# stands in for a simulated topic that names the simulated candidate
SIM_SPARE_TOPIC = "isis"
SIM_PREVALENCES = (0.25, 0.15, 0.08, 0.2, 0.1)
# intercept, followers_millions, length_words, hyperlink, self_reference, then topics
SIM_BETA = (5.5, 0.4, 0.01, -0.8, 0.1, 0.45, -0.25, -0.6, 0.2, -0.35)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tweets", help="tweets JSON-lines file")
    common.add_argument("--followers", help="followers CSV file")
    common.add_argument("--rules", default=DEFAULT_RULES_PATH, help="topic rule file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--candidate", action="append", default=[], help="candidate id (repeatable)")
    common.add_argument("--k", type=int, default=DEFAULT_K, help="topics to select")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative gradient tolerance")
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("--effect-method", choices=EFFECT_METHODS, default="discrete")
    common.add_argument("--eval-model", choices=EVAL_MODELS, default="full")
    common.add_argument("--format", choices=OUTPUT_FORMATS, default="json")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--workers", type=int, default=DEFAULT_WORKERS, help="parallel per-candidate workers")

    parser = argparse.ArgumentParser(prog="liketally", description="Campaign tactics and 'likes' analytics")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("summarize", parents=[common], help="likes summary statistics per candidate")
    sub.add_parser("label", parents=[common], help="topic frequencies per candidate")
    sub.add_parser("fit", parents=[common], help="full-model NB regression per candidate")
    sub.add_parser("select", parents=[common], help="forward-stepwise topic selection")
    sub.add_parser("effects", parents=[common], help="topic marginal effects with 95%% CIs")
    sub.add_parser("rank", parents=[common], help="tactic scores and ranking")
    sub.add_parser("plotdata", parents=[common], help="likes distribution and follower growth data")
    simulate = sub.add_parser("simulate", parents=[common], help="write a synthetic corpus")
    simulate.add_argument("--n", type=int, default=2000, help="tweets to simulate")
    simulate.add_argument("--alpha", type=float, default=0.5, help="dispersion (0 = Poisson)")
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        tweets=args.tweets,
        followers=args.followers,
        rules=args.rules,
        out_dir=args.out,
        candidates=list(args.candidate),
        k=args.k,
        tol=args.tol,
        max_iter=args.max_iter,
        effect_method=args.effect_method,
        eval_model=args.eval_model,
        seed=args.seed,
        output_format=args.format,
        workers=args.workers,
    )


# ---------------- Commands ----------------
def write_outputs(config: RunConfig, name, payload, tables):
    if config.output_format == "csv":
        return [write_csv(os.path.join(config.out_dir, f"{table}.csv"), frame) for table, frame in tables.items()]
    return [write_json(os.path.join(config.out_dir, f"{name}.json"), payload)]


def run_analysis(command, config: RunConfig):
    inputs = pipeline.load_inputs(config.tweets, config.followers, config.rules)
    candidates = pipeline.resolve_candidates(inputs, config.candidates)
    options = FitOptions(tol=config.tol, max_iter=config.max_iter)
    eval_args = dict(method=config.effect_method, eval_model=config.eval_model, k=config.k, workers=config.workers)

    if command == "plotdata":
        tweets = [t for t in inputs.tweets if t.candidate in candidates]
        result = emit_plot_data(tweets, inputs.series, config.out_dir, inputs.rules.party_of(), candidates)
        return list(result["paths"].values())
    if command == "summarize":
        payload, tables = pipeline.run_summarize(inputs, candidates)
    elif command == "label":
        payload, tables = pipeline.run_label(inputs, candidates)
    elif command == "fit":
        payload, tables = pipeline.run_fit(inputs, candidates, options, config.workers)
    elif command == "select":
        payload, tables = pipeline.run_select(inputs, candidates, config.k, options, config.workers)
    elif command == "effects":
        payload, tables = pipeline.run_effects(inputs, candidates, options, **eval_args)
    else:
        payload, tables = pipeline.run_rank(inputs, candidates, options, **eval_args)
    return write_outputs(config, command, payload, tables)


def run_simulate(config: RunConfig, n, alpha):
    rules = load_rules(config.rules)
    candidate = config.candidates[0] if config.candidates else SIM_CANDIDATE
    topics = tuple(SIM_SPARE_TOPIC if t == candidate else t for t in SIM_TOPICS)
    if topics != SIM_TOPICS:
        logger.info(f"ℹ️ Simulating '{SIM_SPARE_TOPIC}' in place of {candidate}'s own name")
    spec = SynthSpec(
        n=n,
        beta=SIM_BETA,
        alpha=alpha,
        topic_prevalences=SIM_PREVALENCES,
        control_distributions=ControlDistributions(),
        seed=config.seed,
        candidate=candidate,
        topic_names=topics,
    )
    _, paths = write_synthetic_corpus(spec, rules, config.out_dir)
    return paths


def run(command, config: RunConfig, **extra):
    """Execute one command; returns the artefact paths (manifest included)."""
    config.validate(needs_inputs=command in ANALYSIS_COMMANDS)
    if command == "simulate":
        paths = run_simulate(config, extra.get("n", 2000), extra.get("alpha", 0.5))
    else:
        paths = run_analysis(command, config)
    return paths + [write_manifest(config.out_dir, paths)]


def main(argv=None):
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    config = config_from_args(args)
    extra = {"n": args.n, "alpha": args.alpha} if args.command == "simulate" else {}
    try:
        paths = run(args.command, config, **extra)
    except ConfigError as e:
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 2
    except LikeTallyError as e:
        logger.error(f"❌ {args.command} failed: {e}")
        print(json.dumps(e.to_dict()), file=sys.stderr)
        return 1
    print(json.dumps({"status": "ok", "command": args.command, "artifacts": [os.path.relpath(p, config.out_dir) for p in paths]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
