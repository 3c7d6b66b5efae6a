# app.py
import click
from flask.cli import FlaskGroup

from oscillatornet import create_app

# 呼叫 oscillatornet/__init__.py 裡面的 create_app 函式
app = create_app()


@click.group(cls=FlaskGroup, create_app=create_app)
def cli():
    """OscillatorNet：由取樣軌跡學習阻尼耦合振子的係數。"""


if __name__ == '__main__':
    # python app.py reproduce --table 1
    cli()
