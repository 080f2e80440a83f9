# routes/analysis_routes.py
import os
import shutil
import tempfile

from flask import Blueprint, jsonify, request
from werkzeug.utils import secure_filename

from models.negbin import FitOptions
from services import pipeline_service as pipeline
from utils.config_utils import DEFAULT_RULES_PATH, RunConfig
from utils.errors import ConfigError, LikeTallyError
from utils.log_utils import get_logger

analysis_bp = Blueprint("analysis", __name__)
logger = get_logger("api")

# Input-side failures; anything else a module raises is a model failure (422)
BAD_INPUT_MODULES = ("corpus", "labeler", "config", "io")


def _save_upload(field, tmp_dir, required=True):
    file = request.files.get(field)
    if file is None or file.filename == "":
        if required:
            raise ConfigError(f"No '{field}' file uploaded", field=field)
        return None
    path = os.path.join(tmp_dir, secure_filename(file.filename) or field)
    file.save(path)
    return path


def _config_from_request():
    args = request.args
    try:
        return RunConfig(
            candidates=args.getlist("candidate"),
            k=int(args.get("k", RunConfig.k)),
            tol=float(args.get("tol", RunConfig.tol)),
            max_iter=int(args.get("max_iter", RunConfig.max_iter)),
            effect_method=args.get("effect_method", "discrete"),
            eval_model=args.get("eval_model", "full"),
        )
    except ValueError as e:
        raise ConfigError(f"Bad query parameter: {e}")


def _run(command):
    tmp_dir = tempfile.mkdtemp(prefix="liketally-")
    try:
        config = _config_from_request()
        config.tweets = _save_upload("tweets", tmp_dir)
        config.followers = _save_upload("followers", tmp_dir)
        config.rules = _save_upload("rules", tmp_dir, required=False) or DEFAULT_RULES_PATH
        config.validate()

        inputs = pipeline.load_inputs(config.tweets, config.followers, config.rules)
        candidates = pipeline.resolve_candidates(inputs, config.candidates)
        options = FitOptions(tol=config.tol, max_iter=config.max_iter)
        eval_args = dict(method=config.effect_method, eval_model=config.eval_model, k=config.k)

        if command == "summarize":
            payload, _ = pipeline.run_summarize(inputs, candidates)
        elif command == "label":
            payload, _ = pipeline.run_label(inputs, candidates)
        elif command == "fit":
            payload, _ = pipeline.run_fit(inputs, candidates, options)
        elif command == "select":
            payload, _ = pipeline.run_select(inputs, candidates, config.k, options)
        elif command == "effects":
            payload, _ = pipeline.run_effects(inputs, candidates, options, **eval_args)
        else:
            payload, _ = pipeline.run_rank(inputs, candidates, options, **eval_args)
        return jsonify(payload), 200

    except LikeTallyError as e:
        status = 400 if e.module in BAD_INPUT_MODULES else 422
        logger.warning(f"⚠️ /api/{command} rejected ({status}): {e}")
        return jsonify(e.to_dict()), status
    except Exception as e:
        logger.exception(f"❌ /api/{command} failed")
        return jsonify({"error": str(e)}), 500
    finally:
        shutil.rmtree(tmp_dir, ignore_errors=True)


# ---------------- Routes ----------------
@analysis_bp.route("/summarize", methods=["POST"])
def summarize():
    return _run("summarize")


@analysis_bp.route("/label", methods=["POST"])
def label():
    return _run("label")


@analysis_bp.route("/fit", methods=["POST"])
def fit():
    return _run("fit")


@analysis_bp.route("/select", methods=["POST"])
def select():
    return _run("select")


@analysis_bp.route("/effects", methods=["POST"])
def effects():
    return _run("effects")


@analysis_bp.route("/rank", methods=["POST"])
def rank():
    return _run("rank")
