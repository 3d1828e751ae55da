"""Regenerates the NIfTI fixtures with nibabel as the reference reader."""
import json

import nibabel as nib
import numpy as np

rng = np.random.default_rng(7)
expected = {}

def save(name, img):
    nib.save(img, name)
    back = nib.load(name)
    data = np.asarray(back.dataobj)
    expected[name] = {
        "dims": list(back.shape),
        "spacing": [float(z) for z in back.header.get_zooms()],
        "orientation": "".join(nib.aff2axcodes(back.affine)),
        "sum": int(data.astype(np.int64).sum()),
        "first": [int(v) for v in data.reshape(-1, order="F")[:8]],
    }

data = rng.integers(0, 15, size=(4, 5, 6), dtype=np.uint16)

# Oblique sform: axis 0 mostly posterior, axis 1 mostly inferior, axis 2 mostly left.
rot = np.array([[0.05, 0.0, -1.0], [-1.0, 0.1, 0.0], [0.0, -1.0, 0.08]])
aff = np.eye(4)
aff[:3, :3] = rot * np.array([0.8, 0.9, 1.7])
aff[:3, 3] = [10.0, -20.0, 5.5]
img = nib.Nifti1Image(data, aff)
img.set_qform(None, code=0)
img.set_sform(aff, code=2)
save("oblique_sform.nii.gz", img)

# qform only, LAS-like with a negative determinant.
aff = np.diag([-0.75, 0.75, 1.65, 1.0])
img = nib.Nifti1Image(data.astype(np.int16), aff)
img.set_sform(None, code=0)
img.set_qform(aff, code=1)
save("las_qform.nii", img)

# Big-endian int16 with scaling, written field by field so the byte
# order and the scale factors survive.
hdr = nib.Nifti1Header(endianness=">")
hdr.set_data_shape(data.shape)
hdr.set_data_dtype(">i2")
hdr.set_sform(np.diag([1.0, -2.0, 3.0, 1.0]), code=1)
hdr.set_qform(np.diag([1.0, -2.0, 3.0, 1.0]), code=1)
hdr["scl_slope"] = 2.0
hdr["scl_inter"] = 1.0
hdr["vox_offset"] = 352
with open("big_endian_scaled.nii", "wb") as f:
    hdr.write_to(f)
    f.write(b"\0" * (352 - f.tell()))
    f.write(data.astype(">i2").tobytes(order="F"))
save_expected = nib.load("big_endian_scaled.nii")
assert save_expected.header.endianness == ">"
d = np.asarray(save_expected.dataobj)
expected["big_endian_scaled.nii"] = {
    "dims": list(save_expected.shape),
    "spacing": [float(z) for z in save_expected.header.get_zooms()],
    "orientation": "".join(nib.aff2axcodes(save_expected.affine)),
    "sum": int(round(d.sum())),
    "first": [int(round(v)) for v in d.reshape(-1, order="F")[:8]],
}

with open("expected.json", "w") as f:
    json.dump(expected, f, indent=2)
