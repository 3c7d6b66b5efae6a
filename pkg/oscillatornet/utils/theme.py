# oscillatornet/utils/theme.py

# --- 🎨 圖表配色 ---
THEME = {
    'truth': '#3C3C3C',         # 真值 - 深灰
    'forecast': '#FFA97F',      # OscillatorNet 預測 - 暖橘
    'ifl': '#FF6347',           # inner feedback loop - 紅
    'baseline': '#1f77b4',      # ResNet 基準 - 藍
    'conservative': '#2ca02c',  # 單一濾波器 (無阻尼) - 綠
    'mapped': '#9467bd',        # 映射出的 x̂2 - 紫
    'background': '#FFF7F2',
    'text': '#3C3C3C',
    'muted': '#999999',
}

# --- 圖表共用樣式 ---
GRAPH_STYLE = {
    'paper_bgcolor': THEME['background'],
    'plot_bgcolor': THEME['background'],
    'font': {'color': THEME['text']},
}

LINE_DASH = {
    'truth': 'solid',
    'forecast': 'dot',
    'mapped': 'dash',
}
