#!/usr/bin/env python3
"""Train the checked-in 784-32-32-10 binarized MNIST fixture.

Reads the digit files shipped in the `mnist` npm package (one JSON file per
digit, `{"data": [...]}` with 784 grayscale values in [0, 1] per image),
trains a fully binarized MLP with straight-through gradients, folds batch-norm
running statistics into `batch_norm` blocks and writes:

  mnist_bnn.json              model document (format 1)
  mnist_test.jsonl            held-out grayscale test images, one per line
  mnist_reference_pairs.json  (input, logits) pairs from this script's forward

Usage: make_mnist_fixture.py <digits_dir> <out_dir> [--seed N] [--epochs N] [--lr X] [--no-shift]
"""

import argparse
import json
import os

import numpy as np
import torch
import torch.nn as nn

THRESHOLD = 0.5


class SignSTE(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return torch.where(x >= 0, torch.ones_like(x), -torch.ones_like(x))

    @staticmethod
    def backward(ctx, grad):
        (x,) = ctx.saved_tensors
        return grad * (x.abs() <= 1).to(grad.dtype)


def sign(x):
    return SignSTE.apply(x)


class BinaryLinear(nn.Linear):
    def forward(self, x):
        return nn.functional.linear(x, sign(self.weight), self.bias)


class Bnn(nn.Module):
    def __init__(self, widths):
        super().__init__()
        self.linears = nn.ModuleList()
        self.norms = nn.ModuleList()
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            last = i == len(widths) - 2
            self.linears.append(BinaryLinear(a, b, bias=last))
            if not last:
                self.norms.append(nn.BatchNorm1d(b))
        # learnable positive scale on the logits; folded away at export
        self.scale = nn.Parameter(torch.tensor(0.1))

    def forward(self, x):
        z = torch.where(x >= THRESHOLD, 1.0, -1.0)
        for lin, bn in zip(self.linears[:-1], self.norms):
            z = sign(bn(lin(z)))
        return self.linears[-1](z) * self.scale.abs()


def load_digits(root):
    xs, ys = [], []
    for d in range(10):
        with open(os.path.join(root, f"{d}.json")) as f:
            data = np.asarray(json.load(f)["data"], dtype=np.float64)
        imgs = data.reshape(-1, 784)
        xs.append(imgs)
        ys.append(np.full(len(imgs), d))
    return np.concatenate(xs), np.concatenate(ys)


def export(model):
    blocks = [{"kind": "input_binarize", "threshold": THRESHOLD}]
    for lin, bn in zip(model.linears[:-1], model.norms):
        w = torch.where(lin.weight >= 0, 1, -1).tolist()
        blocks.append({"kind": "binary_linear", "weights": w})
        sigma = torch.sqrt(bn.running_var + bn.eps)
        blocks.append(
            {
                "kind": "batch_norm",
                "alpha": bn.weight.detach().double().tolist(),
                "gamma": bn.bias.detach().double().tolist(),
                "mu": bn.running_mean.detach().double().tolist(),
                "sigma": sigma.detach().double().tolist(),
            }
        )
        blocks.append({"kind": "sign"})
    last = model.linears[-1]
    scale = model.scale.abs().item()
    blocks.append(
        {
            "kind": "binary_linear",
            "weights": torch.where(last.weight >= 0, 1, -1).tolist(),
            "bias": (last.bias.detach().double() / scale).tolist(),
        }
    )
    return {"format": 1, "name": "mnist_bnn_784_32_32_10", "input_dim": 784, "blocks": blocks}


def reference_forward(doc, x):
    """Independent float64 evaluation of an exported document."""
    v = np.asarray(x, dtype=np.float64)
    for b in doc["blocks"]:
        k = b["kind"]
        if k == "input_binarize":
            v = np.where(v >= b["threshold"], 1.0, -1.0)
        elif k == "binary_linear":
            v = np.asarray(b["weights"], dtype=np.float64) @ v
            if "bias" in b:
                v = v + np.asarray(b["bias"])
        elif k == "batch_norm":
            a, g, m, s = (np.asarray(b[n]) for n in ("alpha", "gamma", "mu", "sigma"))
            v = a * ((v - m) / s) + g
        elif k == "sign":
            v = np.where(v >= 0, 1.0, -1.0)
    return v


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--epochs", type=int, default=150)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--lr", type=float, default=5e-3)
    ap.add_argument("--no-shift", dest="shift", action="store_false")
    ap.add_argument("--ship-test", type=int, default=500)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    rng = np.random.default_rng(args.seed)
    xs, ys = load_digits(args.digits_dir)
    perm = rng.permutation(len(xs))
    xs, ys = xs[perm], ys[perm]
    xte, yte = xs[: args.test], ys[: args.test]
    xtr, ytr = xs[args.test :], ys[args.test :]

    model = Bnn([784, 32, 32, 10])
    opt = torch.optim.Adam(model.parameters(), lr=args.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.epochs)
    xt = torch.tensor(xtr, dtype=torch.float32)
    yt = torch.tensor(ytr)
    for epoch in range(args.epochs):
        model.train()
        order = torch.randperm(len(xt))
        for i in range(0, len(xt), 100):
            idx = order[i : i + 100]
            batch = xt[idx]
            if args.shift:
                # random one-pixel translations
                dx, dy = (int(v) for v in torch.randint(-1, 2, (2,)))
                batch = batch.view(-1, 28, 28).roll((dy, dx), (1, 2)).reshape(-1, 784)
            loss = nn.functional.cross_entropy(model(batch), yt[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            with torch.no_grad():
                for lin in model.linears:
                    lin.weight.clamp_(-1.0, 1.0)
        sched.step()

    model.eval()
    doc = export(model)
    logits = np.stack([reference_forward(doc, x) for x in xte])
    acc = float((logits.argmax(1) == yte).mean())
    print(f"test accuracy {acc:.4f} on {len(xte)} images")

    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "mnist_bnn.json"), "w") as f:
        json.dump(doc, f)
    with open(os.path.join(args.out_dir, "mnist_test.jsonl"), "w") as f:
        for x, y in zip(xte[: args.ship_test], yte[: args.ship_test]):
            f.write(json.dumps({"input": [float(v) for v in x], "label": int(y)}) + "\n")
    pairs = [
        {"input": [float(v) for v in xte[i]], "logits": reference_forward(doc, xte[i]).tolist()}
        for i in range(5)
    ]
    with open(os.path.join(args.out_dir, "mnist_reference_pairs.json"), "w") as f:
        json.dump({"test_accuracy": acc, "pairs": pairs}, f)


if __name__ == "__main__":
    main()
