use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Joint tree rooted at the hip centre. The vertical axis is `z`; the ground
/// plane is `x`–`y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTopology {
    parents: Vec<Option<usize>>,
    hip_center: usize,
    left_hip: usize,
    right_hip: usize,
    /// Joints in breadth-first order from the hip centre.
    order: Vec<usize>,
}

impl SkeletonTopology {
    /// `parents[j]` is the parent joint of `j`; only `hip_center` has none.
    pub fn new(
        parents: Vec<Option<usize>>,
        hip_center: usize,
        left_hip: usize,
        right_hip: usize,
    ) -> Result<Self> {
        let n = parents.len();
        if n < 2 {
            return Err(Error::invalid("skeleton needs at least two joints"));
        }
        if [hip_center, left_hip, right_hip].iter().any(|&j| j >= n) {
            return Err(Error::invalid("hip joint index out of range"));
        }
        if left_hip == right_hip {
            return Err(Error::invalid("left and right hip must differ"));
        }
        let mut children = vec![Vec::new(); n];
        for (j, p) in parents.iter().enumerate() {
            match (*p, j == hip_center) {
                (None, true) => {}
                (Some(p), false) if p < n && p != j => children[p].push(j),
                (None, false) => {
                    return Err(Error::invalid(format!("joint {j} has no parent")));
                }
                (Some(_), true) => return Err(Error::invalid("hip centre must be the root")),
                (Some(p), false) => {
                    return Err(Error::invalid(format!("joint {j} has invalid parent {p}")));
                }
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([hip_center]);
        while let Some(j) = queue.pop_front() {
            order.push(j);
            queue.extend(children[j].iter().copied());
        }
        if order.len() != n {
            return Err(Error::invalid("joint graph is not a tree rooted at the hip centre"));
        }
        Ok(Self {
            parents,
            hip_center,
            left_hip,
            right_hip,
            order,
        })
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn hip_center(&self) -> usize {
        self.hip_center
    }

    /// Non-root joints in breadth-first order, each paired with its parent.
    pub fn bones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.order
            .iter()
            .filter_map(|&j| self.parents[j].map(|p| (p, j)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton<T> {
    pub joints: Vec<[T; 3]>,
}

impl<T: Scalar> Skeleton<T> {
    pub fn new(joints: Vec<[T; 3]>) -> Self {
        Self { joints }
    }

    /// Reads joint-major `x, y, z` triples.
    pub fn from_flat(values: &[T]) -> Result<Self> {
        if values.len() % 3 != 0 {
            return Err(Error::invalid("skeleton coordinates must come in triples"));
        }
        Ok(Self {
            joints: values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.joints.iter().flat_map(|j| j.iter().copied()).collect()
    }

    fn bone_length(&self, parent: usize, child: usize) -> T {
        norm(sub(self.joints[child], self.joints[parent]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSkeleton<T> {
    pub skeleton: Skeleton<T>,
    /// `false` when the hip vector had no ground-plane extent and the
    /// heading rotation was skipped.
    pub rotated: bool,
}

fn sub<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm<T: Scalar>(a: [T; 3]) -> T {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Person-centric normalization: hip centre to the origin, bone lengths
/// copied from `reference` (parents before children), then a rotation about
/// the vertical axis that makes the ground projection of the left-hip →
/// right-hip vector point along `+x`.
pub fn normalize_skeleton<T: Scalar>(
    frame: &Skeleton<T>,
    reference: &Skeleton<T>,
    topology: &SkeletonTopology,
) -> Result<NormalizedSkeleton<T>> {
    let n = topology.num_joints();
    if frame.joints.len() != n || reference.joints.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if frame.joints.len() != n {
                frame.joints.len()
            } else {
                reference.joints.len()
            },
        });
    }

    let root = frame.joints[topology.hip_center()];
    let centered: Vec<[T; 3]> = frame.joints.iter().map(|&j| sub(j, root)).collect();

    let mut out = vec![[T::zero(); 3]; n];
    for (parent, child) in topology.bones() {
        let target = reference.bone_length(parent, child);
        let bone = sub(centered[child], centered[parent]);
        let len = norm(bone);
        let dir = if len > T::zero() {
            bone.map(|c| c / len)
        } else {
            // Collapsed bone: borrow the reference direction.
            let r = sub(reference.joints[child], reference.joints[parent]);
            if target > T::zero() {
                r.map(|c| c / target)
            } else {
                [T::zero(); 3]
            }
        };
        let p = out[parent];
        out[child] = [
            p[0] + dir[0] * target,
            p[1] + dir[1] * target,
            p[2] + dir[2] * target,
        ];
    }

    let hip = sub(out[topology.right_hip], out[topology.left_hip]);
    let planar = (hip[0] * hip[0] + hip[1] * hip[1]).sqrt();
    let rotated = planar > T::of(1e-12);
    if rotated {
        let (c, s) = (hip[0] / planar, hip[1] / planar);
        // rotate by -atan2(y, x)
        for j in out.iter_mut() {
            let (x, y) = (j[0], j[1]);
            j[0] = c * x + s * y;
            j[1] = -s * x + c * y;
        }
        // the rotated hip vector's y is zero analytically
    }
    Ok(NormalizedSkeleton {
        skeleton: Skeleton::new(out),
        rotated,
    })
}
