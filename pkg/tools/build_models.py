"""Regenerate models/{resnet50,vgg16,googlenet}.csv from the published architectures.

    python3 tools/build_models.py [OUTDIR]

Shapes follow the standard 224x224 ImageNet definitions. Activation
functions fused in-place by frameworks are still listed as their own rows
because each pass over a feature map costs DRAM traffic in this model.
"""

import sys
from pathlib import Path

HEADER = "name,kind,in_h,in_w,in_c,out_h,out_w,out_c,k_h,k_w"


class Builder:
    def __init__(self):
        self.rows = []

    def add(self, name, kind, ins, outs, k=(0, 0)):
        self.rows.append((name, kind, *ins, *outs, *k))
        return outs

    def conv(self, name, ins, out_hw, out_c, k):
        return self.add(name, "conv", ins, (out_hw, out_hw, out_c), (k, k))

    def pool(self, name, ins, out_hw, k):
        return self.add(name, "pool", ins, (out_hw, out_hw, ins[2]), (k, k))

    def pointwise(self, name, kind, ins):
        return self.add(name, kind, ins, ins)

    def fc(self, name, in_c, out_c):
        return self.add(name, "fc", (1, 1, in_c), (1, 1, out_c), (1, 1))

    def write(self, path, comment):
        lines = [f"# {c}" if c else "#" for c in comment.strip().splitlines()]
        lines.append(HEADER)
        lines += [",".join(str(v) for v in row) for row in self.rows]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def resnet50():
    b = Builder()
    x = (224, 224, 3)
    x = b.conv("conv1", x, 112, 64, 7)
    x = b.pointwise("bn_conv1", "bn", x)
    x = b.pointwise("relu_conv1", "relu", x)
    x = b.pool("pool1", x, 56, 3)
    stages = [(2, 3, 64, 56), (3, 4, 128, 28), (4, 6, 256, 14), (5, 3, 512, 7)]
    for stage, blocks, width, hw in stages:
        for blk in range(1, blocks + 1):
            tag = f"conv{stage}_{blk}"
            x_in = b.add(f"{tag}_split", "split", x, x)
            if blk == 1:
                p = b.conv(f"{tag}p", x_in, hw, 4 * width, 1)
                b.pointwise(f"{tag}p_bn", "bn", p)
            y = b.conv(f"{tag}a", x_in, hw, width, 1)
            y = b.pointwise(f"{tag}a_bn", "bn", y)
            y = b.pointwise(f"{tag}a_relu", "relu", y)
            y = b.conv(f"{tag}b", y, hw, width, 3)
            y = b.pointwise(f"{tag}b_bn", "bn", y)
            y = b.pointwise(f"{tag}b_relu", "relu", y)
            y = b.conv(f"{tag}c", y, hw, 4 * width, 1)
            y = b.pointwise(f"{tag}c_bn", "bn", y)
            x = b.add(f"{tag}_sum", "eltwise", y, y)
            x = b.pointwise(f"{tag}_relu", "relu", x)
    x = b.pool("pool5", x, 1, 7)
    b.fc("fc1000", x[2], 1000)
    return b


def vgg16():
    b = Builder()
    x = (224, 224, 3)
    hw = 224
    for block, (convs, width) in enumerate([(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)], start=1):
        for i in range(1, convs + 1):
            x = b.conv(f"conv{block}_{i}", x, hw, width, 3)
            x = b.pointwise(f"relu{block}_{i}", "relu", x)
        hw //= 2
        x = b.pool(f"pool{block}", x, hw, 2)
    flat = x[0] * x[1] * x[2]
    b.fc("fc6", flat, 4096)
    b.pointwise("relu6", "relu", (1, 1, 4096))
    b.fc("fc7", 4096, 4096)
    b.pointwise("relu7", "relu", (1, 1, 4096))
    b.fc("fc8", 4096, 1000)
    return b


INCEPTION = {
    # name: (1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5, pool proj)
    "3a": (64, 96, 128, 16, 32, 32),
    "3b": (128, 128, 192, 32, 96, 64),
    "4a": (192, 96, 208, 16, 48, 64),
    "4b": (160, 112, 224, 24, 64, 64),
    "4c": (128, 128, 256, 24, 64, 64),
    "4d": (112, 144, 288, 32, 64, 64),
    "4e": (256, 160, 320, 32, 128, 128),
    "5a": (256, 160, 320, 32, 128, 128),
    "5b": (384, 192, 384, 48, 128, 128),
}


def googlenet():
    b = Builder()
    x = (224, 224, 3)
    x = b.conv("conv1", x, 112, 64, 7)
    x = b.pointwise("conv1_relu", "relu", x)
    x = b.pool("pool1", x, 56, 3)
    x = b.conv("conv2_reduce", x, 56, 64, 1)
    x = b.pointwise("conv2_reduce_relu", "relu", x)
    x = b.conv("conv2", x, 56, 192, 3)
    x = b.pointwise("conv2_relu", "relu", x)
    x = b.pool("pool2", x, 28, 3)

    def branch(name, ins, out_c, k):
        y = b.conv(name, ins, ins[0], out_c, k)
        return b.pointwise(f"{name}_relu", "relu", y)

    for tag, (c1, r3, c3, r5, c5, pp) in INCEPTION.items():
        if tag == "4a":
            x = b.pool("pool3", x, 14, 3)
        elif tag == "5a":
            x = b.pool("pool4", x, 7, 3)
        x_in = b.add(f"inc{tag}_split", "split", x, x)
        branch(f"inc{tag}_1x1", x_in, c1, 1)
        y = branch(f"inc{tag}_3x3_reduce", x_in, r3, 1)
        branch(f"inc{tag}_3x3", y, c3, 3)
        y = branch(f"inc{tag}_5x5_reduce", x_in, r5, 1)
        branch(f"inc{tag}_5x5", y, c5, 5)
        y = b.pool(f"inc{tag}_pool", x_in, x_in[0], 3)
        branch(f"inc{tag}_pool_proj", y, pp, 1)
        x = (x_in[0], x_in[1], c1 + c3 + c5 + pp)
    x = b.pool("pool5", x, 1, 7)
    b.fc("fc", x[2], 1000)
    return b


RESNET_NOTE = """
ResNet-50 (He et al., 2016), 224x224 input, forward pass only.
Linearized execution order per bottleneck block:
  split -> [projection conv + bn, first block of a stage only]
  -> a (1x1) -> bn -> relu -> b (3x3) -> bn -> relu -> c (1x1) -> bn
  -> eltwise sum -> relu
convN_Ma/b/c name the three convs of block M in stage N; convN_Mp is the
projection shortcut. Rows after a split may read the split's output rather
than the row directly above them.
"""

VGG_NOTE = """
VGG-16 (Simonyan and Zisserman, configuration D), 224x224 input, forward pass only.
fc6 reads pool5 flattened to 7*7*512 channels.
"""

GOOGLENET_NOTE = """
GoogleNet (Szegedy et al., 2015), 224x224 input, forward pass only; LRN and
dropout omitted, auxiliary classifiers omitted.
Inception linearization order: split, 1x1 branch, 3x3 reduce -> 3x3,
5x5 reduce -> 5x5, 3x3 pool -> pool projection. Branch outputs are
concatenated in place (no copy row); the next row reads the concatenation.
"""


def main(argv):
    outdir = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parent.parent / "models"
    outdir.mkdir(parents=True, exist_ok=True)
    resnet50().write(outdir / "resnet50.csv", RESNET_NOTE)
    vgg16().write(outdir / "vgg16.csv", VGG_NOTE)
    googlenet().write(outdir / "googlenet.csv", GOOGLENET_NOTE)


if __name__ == "__main__":
    main(sys.argv)
