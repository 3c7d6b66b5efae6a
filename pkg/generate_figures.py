import argparse
import glob
import os

import pandas as pd
from tqdm import tqdm  # 顯示進度條

from oscillatornet.utils.data_io import read_json
from oscillatornet.utils.visualization import build_forecast_figure, build_loss_figure, build_mapping_figure

# 與 forecast CSV 同名前綴的基準模型預測
BASELINES = ('conservative', 'baseline')


def _figure_path(csv_path, suffix):
    return os.path.splitext(csv_path)[0] + suffix


def _forecast_figures(output_dir):
    written = []
    for path in tqdm(sorted(glob.glob(os.path.join(output_dir, '**', '*_forecast.csv'), recursive=True)), desc='forecast'):
        prefix = path[:-len('_forecast.csv')]
        extra = {}
        for label in BASELINES:
            other = f'{prefix}_forecast_{label}.csv'
            if os.path.exists(other):
                extra[label] = pd.read_csv(other)
        ifl = f'{prefix}_forecast_ifl.csv'
        if os.path.exists(ifl):
            extra['ifl'] = pd.read_csv(ifl)
        name = os.path.basename(prefix)
        fig = build_forecast_figure(pd.read_csv(path), title=f'{name}: free forecast', extra=extra)
        out = _figure_path(path, '.html')
        fig.write_html(out)
        written.append(out)
    return written


def _mapping_figures(output_dir):
    written = []
    for path in sorted(glob.glob(os.path.join(output_dir, '**', '*_mapping.csv'), recursive=True)):
        name = os.path.basename(path)[:-len('_mapping.csv')]
        fig = build_mapping_figure(pd.read_csv(path), title=f'{name}: x2 reconstructed from x1')
        out = _figure_path(path, '.html')
        fig.write_html(out)
        written.append(out)
    return written


def _loss_figures(output_dir):
    written = []
    for path in sorted(glob.glob(os.path.join(output_dir, '**', '*_report.json'), recursive=True)):
        report = read_json(path)
        name = os.path.basename(path)[:-len('_report.json')]
        fig = build_loss_figure(report.get('loss_history', []), title=f'{name}: training loss')
        out = _figure_path(path, '_loss.html')
        fig.write_html(out)
        written.append(out)
    return written


def generate_figures(output_dir):
    """把 CLI 輸出的 CSV / JSON 轉成 plotly HTML 圖 (Turn the CLI outputs into figures)."""
    if not os.path.isdir(output_dir):
        print(f"❌ 找不到輸出資料夾: {output_dir}")
        return []
    written = _forecast_figures(output_dir) + _mapping_figures(output_dir) + _loss_figures(output_dir)
    print(f"✅ 完成！共產生 {len(written)} 張圖")
    return written


if __name__ == '__main__':
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument('output_dir', nargs='?', default='output')
    generate_figures(parser.parse_args().output_dir)
