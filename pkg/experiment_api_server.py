"""
Experiment API Server
JSON endpoints for running pointer-state experiments and analysing cycles.
Run locally with `python experiment_api_server.py`, or in production with
`gunicorn experiment_api_server:app`.
"""

import json
import logging
import os

from dotenv import load_dotenv
from flask import Flask, jsonify, request
from werkzeug.exceptions import HTTPException

# Load environment
load_dotenv()

from backend.quantum.errors import ConfigInvalid, NumericRegimeError, PointerStateError
from backend.runner.experiment_runner import analyze_cycle, run_experiment
from backend.runner.logging_setup import configure_logging
from backend.runner.result_table import to_jsonable
from config.experiment_config import parse_experiment
from config.simulation_config import get_simulation_config

configure_logging()
log = logging.getLogger("api")

app = Flask(__name__)


def _error_response(e: Exception):
    """400 for bad documents, 422 for inputs outside the numeric regime"""
    if isinstance(e, ConfigInvalid):
        return jsonify({'success': False, 'error': str(e), 'field': e.field_path}), 400
    if isinstance(e, NumericRegimeError):
        return jsonify({'success': False, 'error': str(e), 'type': type(e).__name__}), 422
    if isinstance(e, PointerStateError):
        return jsonify({'success': False, 'error': str(e), 'type': type(e).__name__}), 400
    log.exception(f"{type(e).__name__}: {e}")
    return jsonify({'success': False, 'error': str(e)}), 500


@app.errorhandler(Exception)
def handle_uncaught_exception(e):
    if isinstance(e, HTTPException):
        return e
    log.error(f"[UNCAUGHT] {type(e).__name__}: {e}")
    return jsonify({'success': False, 'error': 'Internal server error'}), 500


@app.route('/api/health')
def health():
    config = get_simulation_config()
    return jsonify({'success': True, 'status': 'ok', 'version': config.artifact_version})


@app.route('/api/run-experiment', methods=['POST'])
def run_experiment_endpoint():
    """Run the posted experiment document and report the files written"""
    try:
        document = request.get_json(silent=True)
        if document is None:
            return jsonify({'success': False, 'error': 'Request body must be a JSON experiment document'}), 400

        config = parse_experiment(document)
        log.info(f"Running {config.kind} experiment {config.config_hash()[:12]}")
        summary = run_experiment(config)
        return app.response_class(response=_dump({'success': True, **summary}), mimetype='application/json')

    except Exception as e:
        return _error_response(e)


@app.route('/api/analyze-cycle', methods=['POST'])
def analyze_cycle_endpoint():
    """Decomposition and bounds for one cycle, returned inline (nothing is written)"""
    try:
        document = request.get_json(silent=True)
        if document is None:
            return jsonify({'success': False, 'error': 'Request body must be a JSON experiment document'}), 400

        document = {**document, 'kind': 'analyze-cycle'}
        config = parse_experiment(document)
        report = analyze_cycle(config)
        return app.response_class(
            response=_dump({'success': True, 'config_hash': config.config_hash(), 'analysis': report}),
            mimetype='application/json',
        )

    except Exception as e:
        return _error_response(e)


def _dump(payload) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True)


if __name__ == '__main__':
    port = int(os.environ.get('PORT', 5000))
    print("=" * 80)
    print("POINTER-STATE TOOLKIT - Experiment API Server")
    print("=" * 80)
    print(f"\nAPI available at: http://localhost:{port}/api/health")
    print(f"\nPress Ctrl+C to stop")
    print("=" * 80)

    app.run(debug=False, port=port, host='0.0.0.0')
