import os

from flask import Flask, jsonify
from flask_cors import CORS
from dotenv import load_dotenv

from routes.analysis_routes import analysis_bp
from utils.log_utils import configure_logging, get_logger

# ---------------- Load Env ----------------
load_dotenv()
PORT = int(os.getenv("PORT", 5000))
DEBUG = os.getenv("DEBUG", "True").lower() == "true"
MAX_UPLOAD_MB = int(os.getenv("LIKETALLY_MAX_UPLOAD_MB", 64))

configure_logging()
logger = get_logger("app")


# ---------------- Flask App ----------------
def create_app():
    app = Flask(__name__)
    app.config["MAX_CONTENT_LENGTH"] = MAX_UPLOAD_MB * 1024 * 1024
    CORS(app, resources={r"/api/*": {"origins": "*"}})
    app.register_blueprint(analysis_bp, url_prefix="/api")

    # ---------------- Health ----------------
    @app.route("/health")
    @app.route("/api/health")
    def health():
        return jsonify({"status": "ok"}), 200

    return app


app = create_app()


if __name__ == "__main__":
    logger.info(f"✅ Serving liketally API on port {PORT}")
    app.run(host="0.0.0.0", port=PORT, debug=DEBUG)
