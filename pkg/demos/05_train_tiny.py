"""Train a small model on eight fixed tables and look at its predictions.

This is a scaled-down version of the overfit acceptance run (a few minutes
on a laptop CPU); expect rough but recognizable structure.  Increase
STAGE_EPOCHS/EPOCH_ITERS for the full overfit behavior.
"""

import tempfile
import time
from pathlib import Path

from tablestruct import synthdata
from tablestruct.config import Config
from tablestruct.evaluate import evaluate_dirs, format_report
from tablestruct.infer import render_overlay, result_cells, run_inference, save_result
from tablestruct.train import load_checkpoint, train_staged

STAGE_EPOCHS = 2
EPOCH_ITERS = 10

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

work = Path(tempfile.mkdtemp(prefix="tablestruct_demo_"))
data_dir = work / "data"
synthdata.write_specs(data_dir, synthdata.overfit_specs())

cfg = Config(
    stage_epochs=STAGE_EPOCHS, stages=3, batch_size=8, epoch_iters=EPOCH_ITERS,
    lr=2e-4, rescale_shorter_side=(192,), data_dir=str(data_dir),
    out_dir=str(work / "run"), seed=0, infer_size=192, resize_mode="shorter",
)
t0 = time.time()
final = train_staged(cfg)
print(f"trained {3 * STAGE_EPOCHS} epochs in {time.time() - t0:.0f}s")

model, cfg_loaded, _ = load_checkpoint(final)
pred_dir = work / "pred"
pred_dir.mkdir()
for sid in synthdata.load_manifest(data_dir)["train"]:
    image, _ = synthdata.load_sample(data_dir, sid)
    result = run_inference(model, image, cfg_loaded)
    save_result(result, pred_dir / f"{sid}.json")
    render_overlay(image, result_cells(result)).save(OUT / f"tiny_{sid}.png")

report = evaluate_dirs(pred_dir, data_dir / "annotations")
print(format_report(report))
print(f"overlays in {OUT}/tiny_*.png, work dir {work}")
