import logging

from flask import Flask
from flask.logging import default_handler

from .utils.const import DEFAULT_APP_CONFIG


def _configure_logging(level):
    # 套件 logger 共用 Flask 的 handler，子模組以 logging.getLogger(__name__) 取用
    logger = logging.getLogger('oscillatornet')
    if default_handler not in logger.handlers:
        logger.addHandler(default_handler)
    logger.setLevel(level)
    return logger


def create_app(test_config=None):
    """
    建立 Flask app：設定預設值 → OSCILLATORNET_* 環境變數 → test_config，
    並註冊 CLI 指令 (simulate / train / forecast / map / reproduce)。
    """
    app = Flask(__name__)
    app.config.from_mapping(DEFAULT_APP_CONFIG)
    app.config.from_prefixed_env('OSCILLATORNET')
    if test_config is not None:
        app.config.from_mapping(test_config)

    _configure_logging(str(app.config['LOG_LEVEL']).upper())

    with app.app_context():
        from .commands import cli_bp
        app.register_blueprint(cli_bp)

    return app
