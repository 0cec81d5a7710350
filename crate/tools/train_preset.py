#!/usr/bin/env python3
"""Train the preset-architecture digit classifier and export it with sample images.

Digits come from scikit-learn's 8x8 set, upscaled to 20x20 and centred on a
28x28 canvas. Writes models/preset.model, models/tiny.model and images/.
"""

import argparse
import pathlib

import numpy as np
import torch
from sklearn.datasets import load_digits
from torch import nn
from torch.nn import functional as F

ROOT = pathlib.Path(__file__).resolve().parent.parent


def to_canvas(digits):
    x = torch.tensor(digits, dtype=torch.float32).reshape(-1, 1, 8, 8) / 16.0
    x = F.interpolate(x, size=(20, 20), mode="bilinear", align_corners=False)
    x = F.pad(x, (4, 4, 4, 4))
    return (x.clamp(0, 1) * 255).round().to(torch.uint8)


def normalize(pixels):
    return pixels.float() / 127.5 - 1.0


class Net(nn.Module):
    def __init__(self):
        super().__init__()
        self.c1 = nn.Conv2d(1, 4, 5)
        self.c2 = nn.Conv2d(4, 15, 5)
        self.fc = nn.Linear(240, 10)

    def forward(self, x):
        x = F.max_pool2d(F.relu(self.c1(x)), 2)
        x = F.max_pool2d(F.relu(self.c2(x)), 2)
        return self.fc(x.flatten(1))


def reals(t):
    return " ".join(repr(float(v)) for v in t.detach().double().flatten().tolist())


def write_model(path, input_shape, layers):
    lines = ["gcnn-model 1", "format 32 16", "input " + " ".join(map(str, input_shape))]
    for header, w, b in layers:
        lines += [header, "weights", reals(w), "biases", reals(b)]
    lines.append("end")
    path.write_text("\n".join(lines) + "\n")


def write_pgm(path, pixels):
    h, w = pixels.shape
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.numpy().astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--test-images", type=int, default=20)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    data = load_digits()
    pixels = to_canvas(data.images)
    labels = torch.tensor(data.target)
    perm = torch.randperm(len(labels), generator=torch.Generator().manual_seed(args.seed))
    split = len(labels) - 297
    train, test = perm[:split], perm[split:]

    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    xs, ys = normalize(pixels[train]), labels[train]
    for epoch in range(args.epochs):
        order = torch.randperm(len(ys))
        for i in range(0, len(ys), 64):
            idx = order[i : i + 64]
            opt.zero_grad()
            loss = F.cross_entropy(net(xs[idx]), ys[idx])
            loss.backward()
            opt.step()
    with torch.no_grad():
        acc = (net(normalize(pixels[test])).argmax(1) == labels[test]).float().mean().item()
    print(f"held-out accuracy {acc:.4f}")

    write_model(
        ROOT / "models" / "preset.model",
        (1, 28, 28),
        [
            ("layer conv in=1 out=4 kernel=5 pool=2 activation=relu", net.c1.weight, net.c1.bias),
            ("layer conv in=4 out=15 kernel=5 pool=2 activation=relu", net.c2.weight, net.c2.bias),
            ("layer fc in=240 out=10 activation=linear", net.fc.weight, net.fc.bias),
        ],
    )

    images = ROOT / "images"
    images.mkdir(exist_ok=True)
    label_lines = []
    for k, i in enumerate(test[: args.test_images].tolist()):
        name = f"digit{k:02d}.pgm"
        write_pgm(images / name, pixels[i, 0])
        label_lines.append(f"{name} {int(labels[i])}")
    (images / "labels.txt").write_text("\n".join(label_lines) + "\n")

    # 6x6 two-class model separating zeros (class 0) from ones (class 1).
    # Weights sit on a 1/8 grid so they are exact in fixed point.
    tiny = images / "tiny"
    tiny.mkdir(exist_ok=True)
    small = torch.tensor(data.images, dtype=torch.float32).reshape(-1, 1, 8, 8) / 16.0
    small = F.interpolate(small, size=(6, 6), mode="area")
    small = (small.clamp(0, 1) * 255).round().to(torch.uint8)
    kernel = torch.tensor([[1.375, -0.625, -2.875], [2.5, -1.5, -0.625], [0.375, 1.5, 2.375]])
    write_model(
        ROOT / "models" / "tiny.model",
        (1, 6, 6),
        [
            ("layer conv in=1 out=1 kernel=3 pool=2 activation=relu", kernel, torch.tensor([2.375])),
            (
                "layer fc in=4 out=2 activation=linear",
                torch.tensor([[-0.25, 0.25, 2.375, -1.75], [0.375, -0.75, -2.25, 1.375]]),
                torch.tensor([0.5, -0.5]),
            ),
        ],
    )
    picks = [i for i in range(len(labels)) if int(labels[i]) in (0, 1)][:4]
    for k, i in enumerate(picks):
        write_pgm(tiny / f"tiny{k}.pgm", small[i, 0])


if __name__ == "__main__":
    main()
