"""Smoke test for the Python bindings.

Build the extension first:

    cargo build --release -p scenedet-py --features extension-module

then run `python3 python/smoke_test.py` from the repository root.
"""

import importlib.util
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module(tmp):
    for name in ("libscenedet_py.so", "libscenedet_py.dylib", "scenedet_py.dll"):
        built = os.path.join(ROOT, "target", "release", name)
        if os.path.exists(built):
            break
    else:
        sys.exit("extension not built; see the module docstring")
    suffix = ".pyd" if built.endswith(".dll") else ".so"
    target = os.path.join(tmp, "scenedet" + suffix)
    shutil.copy(built, target)
    spec = importlib.util.spec_from_file_location("scenedet", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def write_pgm(path, frame):
    width, height, pixels = frame
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (width, height))
        f.write(bytes(pixels))


def main():
    with tempfile.TemporaryDirectory() as tmp:
        sd = load_module(tmp)

        assert sd.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
        assert sd.iou((0, 0, 10, 10), (20, 20, 5, 5)) == 0.0

        scores = sd.propagate([[0.0], [1.0], [0.1], [0.9]], [0.0, 1.0], k=1)
        assert scores[:2] == [0.0, 1.0]
        assert scores[2] < 0.5 < scores[3]

        frames, boxes, negatives = sd.synth(seed=7, frames=60, negatives=6)
        assert len(frames) == 60 and len(boxes) == 60 and len(negatives) == 6
        assert len(sd.hog(frames[0], boxes[0][0])) == 756

        video = os.path.join(tmp, "video")
        negs = os.path.join(tmp, "negatives")
        os.makedirs(video)
        os.makedirs(negs)
        for i, f in enumerate(frames):
            write_pgm(os.path.join(video, "frame_%05d.pgm" % i), f)
        for i, f in enumerate(negatives):
            write_pgm(os.path.join(negs, "neg_%05d.pgm" % i), f)

        model = os.path.join(tmp, "model.json")
        xi = sd.learn(video, negs, model, {"max_iterations": 2})
        assert 1 <= len(xi) <= 2 and all(0.0 <= x <= 1.0 for x in xi)

        dets = sd.detect(model, video)
        ap, max_recall = sd.evaluate(dets, boxes)
        assert 0.0 <= ap <= 1.0 and 0.0 <= max_recall <= 1.0
        print("ok: %d detections, AP %.3f, max recall %.3f" % (len(dets), ap, max_recall))


if __name__ == "__main__":
    main()
