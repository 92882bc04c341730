//! Field containers: scalar, vector, Q-tensor, and angle fields on a grid.
//!
//! Data is stored flat in row-major (axis0, axis1, axis2) order; the grid
//! structs carry the geometry. Q-fields store the five basis coefficients
//! component-major so per-component stencils stay cache friendly.

use crate::tensor::{Frame, Mat3, QTensor, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub dims: [usize; 3],
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(dims: [usize; 3]) -> Self {
        ScalarField {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut field = Self::zeros(dims);
        let mut idx = 0;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    field.data[idx] = f(i, j, k);
                    idx += 1;
                }
            }
        }
        field
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.idx(i, j, k);
        self.data[idx] = v;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.dims, other.dims);
        ScalarField {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    pub comps: [ScalarField; 3],
}

impl VectorField3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        VectorField3 {
            comps: [
                ScalarField::zeros(dims),
                ScalarField::zeros(dims),
                ScalarField::zeros(dims),
            ],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.comps[0].dims
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.comps[0].get(i, j, k),
            self.comps[1].get(i, j, k),
            self.comps[2].get(i, j, k),
        )
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: &Vec3) {
        self.comps[0].set(i, j, k, v.x);
        self.comps[1].set(i, j, k, v.y);
        self.comps[2].set(i, j, k, v.z);
    }
}

/// Five basis-coefficient scalar fields q₁…q₅.
#[derive(Debug, Clone, PartialEq)]
pub struct QField {
    pub comps: [ScalarField; 5],
}

impl QField {
    pub fn zeros(dims: [usize; 3]) -> Self {
        QField {
            comps: std::array::from_fn(|_| ScalarField::zeros(dims)),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.comps[0].dims
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps[0].is_empty()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> QTensor {
        QTensor::from_coeffs(std::array::from_fn(|c| self.comps[c].get(i, j, k)))
    }

    pub fn get_flat(&self, idx: usize) -> QTensor {
        QTensor::from_coeffs(std::array::from_fn(|c| self.comps[c].data[idx]))
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, q: &QTensor) {
        let coeffs = q.coeffs();
        for c in 0..5 {
            self.comps[c].set(i, j, k, coeffs[c]);
        }
    }

    pub fn set_flat(&mut self, idx: usize, q: &QTensor) {
        let coeffs = q.coeffs();
        for c in 0..5 {
            self.comps[c].data[idx] = coeffs[c];
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> QTensor) -> Self {
        let mut q = Self::zeros(dims);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let v = f(i, j, k);
                    q.set(i, j, k, &v);
                }
            }
        }
        q
    }
}

/// Symmetric 3x3 tensor field stored as the six independent components
/// (xx, yy, zz, xy, xz, yz).
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub comps: [ScalarField; 6],
}

pub const SYM_IDX: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

impl SymTensorField {
    pub fn zeros(dims: [usize; 3]) -> Self {
        SymTensorField {
            comps: std::array::from_fn(|_| ScalarField::zeros(dims)),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.comps[0].dims
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Mat3 {
        let c: [f64; 6] = std::array::from_fn(|m| self.comps[m].get(i, j, k));
        Mat3::new(c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2])
    }

    pub fn get_flat(&self, idx: usize) -> Mat3 {
        let c: [f64; 6] = std::array::from_fn(|m| self.comps[m].data[idx]);
        Mat3::new(c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2])
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, m: &Mat3) {
        for (slot, (a, b)) in SYM_IDX.iter().enumerate() {
            self.comps[slot].set(i, j, k, m[(*a, *b)]);
        }
    }
}

/// Director angle fields (f, g) in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleField {
    pub f: ScalarField,
    pub g: ScalarField,
}

impl AngleField {
    pub fn dims(&self) -> [usize; 3] {
        self.f.dims
    }

    pub fn frame_at(&self, i: usize, j: usize, k: usize) -> Frame {
        Frame::from_angles(self.f.get(i, j, k), self.g.get(i, j, k))
    }
}

/// Orthonormal frame field (n, m, p).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub n: VectorField3,
    pub m: VectorField3,
    pub p: VectorField3,
}

impl FrameField {
    pub fn dims(&self) -> [usize; 3] {
        self.n.dims()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Frame {
        Frame {
            n: self.n.get(i, j, k),
            m: self.m.get(i, j, k),
            p: self.p.get(i, j, k),
        }
    }
}

/// Builds the (n, m, p) frame field from director angles pointwise.
pub fn frame_from_angles(angles: &AngleField) -> FrameField {
    let dims = angles.dims();
    let mut field = FrameField {
        n: VectorField3::zeros(dims),
        m: VectorField3::zeros(dims),
        p: VectorField3::zeros(dims),
    };
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let fr = angles.frame_at(i, j, k);
                field.n.set(i, j, k, &fr.n);
                field.m.set(i, j, k, &fr.m);
                field.p.set(i, j, k, &fr.p);
            }
        }
    }
    field
}

/// Pointwise uniaxial composition Q = s (n⊗n − I/3) over a grid.
pub fn qfield_from_uniaxial(s: &ScalarField, angles: &AngleField) -> QField {
    assert_eq!(s.dims, angles.dims());
    let dims = s.dims;
    QField::from_fn(dims, |i, j, k| {
        let fr = angles.frame_at(i, j, k);
        crate::tensor::uniaxial_compose_unchecked(s.get(i, j, k), &fr.n)
    })
}
