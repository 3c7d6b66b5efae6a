import numpy as np
import pandas as pd
import plotly.graph_objects as go

from .theme import GRAPH_STYLE, LINE_DASH, THEME


def _empty_figure(title, message):
    fig = go.Figure()
    fig.update_layout(
        title=title, **GRAPH_STYLE,
        annotations=[dict(text=message, x=0.5, y=0.5, showarrow=False, font=dict(color=THEME['muted']))],
    )
    return fig


def _channels(df):
    return [c for c in df.columns if c.startswith('x') and c[1:].isdigit()]


# 預測圖 (truth + forecast)
def build_forecast_figure(df: pd.DataFrame, title: str = 'Free forecast', extra=None):
    """
    df 為 forecast CSV (t, x1[, x2], source)；extra 是 {label: DataFrame} 的其他預測 (例如基準模型)。
    """
    if df.empty:
        return _empty_figure(title, '沒有資料')

    fig = go.Figure()
    for source in ('truth', 'forecast'):
        part = df[df['source'] == source]
        for col in _channels(df):
            fig.add_trace(go.Scatter(
                x=part['t'], y=part[col], name=f'{col} {source}',
                mode='lines' if source == 'truth' else 'markers',
                line=dict(color=THEME[source], dash=LINE_DASH[source]),
            ))
    for label, other in (extra or {}).items():
        part = other[other['source'] == 'forecast']
        for col in _channels(other):
            fig.add_trace(go.Scatter(
                x=part['t'], y=part[col], name=f'{col} {label}', mode='markers',
                marker=dict(color=THEME.get(label, THEME['muted']), size=5),
            ))
    fig.update_layout(title=title, xaxis_title='t [s]', yaxis_title='x [m]', **GRAPH_STYLE)
    return fig


# 映射圖 (x1, x2 真值, x̂2)
def build_mapping_figure(df: pd.DataFrame, title: str = 'Mapped trajectory'):
    if df.empty:
        return _empty_figure(title, '沒有資料')
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=df['t'], y=df['x1'], name='x1', line=dict(color=THEME['truth'])))
    fig.add_trace(go.Scatter(x=df['t'], y=df['x2_true'], name='x2 true', line=dict(color=THEME['forecast'])))
    fig.add_trace(go.Scatter(
        x=df['t'], y=df['x2_mapped'], name='x2 mapped',
        line=dict(color=THEME['mapped'], dash=LINE_DASH['mapped']),
    ))
    mode = df['mode'].iloc[0] if 'mode' in df else ''
    padding = df['padding'].iloc[0] if 'padding' in df else ''
    fig.update_layout(title=f'{title} ({mode}, {padding})', xaxis_title='t [s]', yaxis_title='x [m]', **GRAPH_STYLE)
    return fig


# 訓練損失 (log scale)
def build_loss_figure(loss_history, title: str = 'Training loss'):
    loss = np.asarray(loss_history, dtype=np.float64)
    if loss.size == 0:
        return _empty_figure(title, '沒有訓練紀錄')
    fig = go.Figure(go.Scatter(x=np.arange(loss.size), y=loss, mode='lines', line=dict(color=THEME['forecast'])))
    fig.update_layout(title=title, xaxis_title='iteration', yaxis_title='loss', yaxis_type='log', **GRAPH_STYLE)
    return fig
