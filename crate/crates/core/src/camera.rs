//! Pinhole cameras in the OpenCV convention: +z forward, x right, y down.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rotation blocks further than this from orthonormal are rejected on load.
pub const LOAD_ORTHONORMAL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vector3<f64>,
}

impl CameraView {
    pub fn new(
        width: u32,
        height: u32,
        intrinsics: [f64; 4],
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let [fx, fy, cx, cy] = intrinsics;
        let view = CameraView {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        };
        view.validate(1e-6).map_err(|reason| Error::InvalidView { index: 0, reason })?;
        Ok(view)
    }

    fn validate(&self, tol: f64) -> std::result::Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("zero image size".into());
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive, got {} {}", self.fx, self.fy));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            ));
        }
        let r = &self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if !(err <= tol) {
            return Err(format!("rotation not orthonormal (error {err:.2e})"));
        }
        let det = r.determinant();
        if det < 0.0 {
            return Err(format!("rotation has determinant {det:.3}"));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err("non-finite translation".into());
        }
        Ok(())
    }

    /// Camera with its center at `eye` looking at `target`; `up` picks the roll.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        width: u32,
        height: u32,
        focal: f64,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let down = -(up - forward * up.dot(&forward));
        if down.norm() < 1e-9 {
            return Err(Error::InvalidParameter("up vector parallel to view direction".into()));
        }
        let down = down.normalize();
        let right = down.cross(&forward);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        CameraView::new(
            width,
            height,
            [focal, focal, width as f64 / 2.0, height as f64 / 2.0],
            rotation,
            translation,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Pixel coordinates and camera-z of a world point; `None` behind the camera.
    pub fn project_point(&self, p: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
        let c = self.to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        Some((
            Vector2::new(self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy),
            c.z,
        ))
    }

    /// Ray through the continuous image point `(u, v)`.
    ///
    /// Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`, so its center is `(i+0.5, j+0.5)`.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
        if !(0.0..=self.width as f64).contains(&u) || !(0.0..=self.height as f64).contains(&v) {
            return Err(Error::PixelOutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        let d_cam = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let dir = (self.rotation.transpose() * d_cam).normalize();
        Ok((self.center(), dir))
    }

    pub fn pixel_center_ray(&self, ix: u32, iy: u32) -> Result<(Vector3<f64>, Vector3<f64>)> {
        self.pixel_ray(ix as f64 + 0.5, iy as f64 + 0.5)
    }

    pub fn world_to_camera_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    views: Vec<CameraView>,
}

impl ViewSet {
    pub fn new(views: Vec<CameraView>) -> Result<Self> {
        let first = views
            .first()
            .ok_or_else(|| Error::InvalidViewSet("view set is empty".into()))?;
        let (w, h) = (first.width, first.height);
        if let Some(i) = views.iter().position(|v| v.width != w || v.height != h) {
            return Err(Error::InvalidView {
                index: i,
                reason: format!("size {}x{} differs from {w}x{h}", views[i].width, views[i].height),
            });
        }
        Ok(ViewSet { views })
    }

    pub fn views(&self) -> &[CameraView] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn width(&self) -> u32 {
        self.views[0].width
    }

    pub fn height(&self) -> u32 {
        self.views[0].height
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CameraView> {
        self.views.iter()
    }

    /// Rescales every view to `width`×`height`, adjusting intrinsics proportionally.
    pub fn resized(&self, width: u32, height: u32) -> Result<ViewSet> {
        let sx = width as f64 / self.width() as f64;
        let sy = height as f64 / self.height() as f64;
        let views = self
            .views
            .iter()
            .map(|v| CameraView {
                width,
                height,
                fx: v.fx * sx,
                fy: v.fy * sy,
                cx: v.cx * sx,
                cy: v.cy * sy,
                rotation: v.rotation,
                translation: v.translation,
            })
            .collect();
        ViewSet::new(views)
    }
}

impl<'a> IntoIterator for &'a ViewSet {
    type Item = &'a CameraView;
    type IntoIter = std::slice::Iter<'a, CameraView>;
    fn into_iter(self) -> Self::IntoIter {
        self.views.iter()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    world_to_camera: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ViewSetJson {
    #[serde(default = "schema_version")]
    schema: u32,
    width: u32,
    height: u32,
    views: Vec<ViewJson>,
}

fn schema_version() -> u32 {
    1
}

/// Projects a nearly orthonormal matrix onto the closest rotation.
fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    u * vt
}

pub fn parse_views(text: &str) -> Result<ViewSet> {
    let raw: ViewSetJson =
        serde_json::from_str(text).map_err(|e| Error::json("views.json", e))?;
    if raw.views.is_empty() {
        return Err(Error::InvalidViewSet("file contains 0 views".into()));
    }
    let mut views = Vec::with_capacity(raw.views.len());
    for (index, v) in raw.views.iter().enumerate() {
        let bad = |reason: String| Error::InvalidView { index, reason };
        if v.world_to_camera.len() != 16 {
            return Err(bad(format!(
                "world_to_camera has {} entries, expected 16",
                v.world_to_camera.len()
            )));
        }
        let m = Matrix4::from_row_slice(&v.world_to_camera);
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).abs().max() > 1e-6 {
            return Err(bad("bottom row of world_to_camera must be [0,0,0,1]".into()));
        }
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let t: Vector3<f64> = m.fixed_view::<3, 1>(0, 3).into();
        let view = CameraView {
            width: raw.width,
            height: raw.height,
            fx: v.fx,
            fy: v.fy,
            cx: v.cx,
            cy: v.cy,
            rotation: r,
            translation: t,
        };
        view.validate(LOAD_ORTHONORMAL_TOL).map_err(bad)?;
        views.push(CameraView {
            rotation: orthonormalize(&r),
            ..view
        });
    }
    ViewSet::new(views)
}

pub fn load_views(path: impl AsRef<Path>) -> Result<ViewSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_views(&text)
}

pub fn views_to_json(views: &ViewSet) -> String {
    let raw = ViewSetJson {
        schema: 1,
        width: views.width(),
        height: views.height(),
        views: views
            .iter()
            .map(|v| {
                let m = v.world_to_camera_matrix();
                ViewJson {
                    fx: v.fx,
                    fy: v.fy,
                    cx: v.cx,
                    cy: v.cy,
                    world_to_camera: (0..16).map(|i| m[(i / 4, i % 4)]).collect(),
                }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("view set serializes")
}

pub fn save_views(views: &ViewSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, views_to_json(views)).map_err(|e| Error::io(path, e))
}

/// Ring of cameras around a point, world up = +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orbit {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub count: usize,
    pub resolution: u32,
    /// Elevation of the ring above the center, degrees.
    pub elevation_deg: f64,
    /// Azimuth of the first camera, degrees.
    pub azimuth_offset_deg: f64,
    /// Focal length as a multiple of the resolution.
    pub focal_scale: f64,
}

impl Orbit {
    pub fn new(center: Vector3<f64>, radius: f64, count: usize, resolution: u32) -> Self {
        Orbit {
            center,
            radius,
            count,
            resolution,
            elevation_deg: 0.0,
            azimuth_offset_deg: 0.0,
            focal_scale: 1.0,
        }
    }

    pub fn elevation(mut self, deg: f64) -> Self {
        self.elevation_deg = deg;
        self
    }

    pub fn azimuth_offset(mut self, deg: f64) -> Self {
        self.azimuth_offset_deg = deg;
        self
    }

    pub fn focal_scale(mut self, scale: f64) -> Self {
        self.focal_scale = scale;
        self
    }

    pub fn azimuths_deg(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.azimuth_offset_deg + 360.0 * i as f64 / self.count as f64)
            .collect()
    }

    pub fn cameras(&self) -> Result<Vec<CameraView>> {
        if self.count == 0 || !(self.radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "orbit needs n >= 1 and radius > 0 (got n={}, r={})",
                self.count, self.radius
            )));
        }
        let el = self.elevation_deg.to_radians();
        self.azimuths_deg()
            .into_iter()
            .map(|az| {
                let az = az.to_radians();
                let offset = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let eye = self.center + offset * self.radius;
                // Straight up or down: pick +y as the roll reference instead.
                let up = if el.cos().abs() < 1e-9 {
                    Vector3::y()
                } else {
                    Vector3::z()
                };
                CameraView::look_at(
                    eye,
                    self.center,
                    up,
                    self.resolution,
                    self.resolution,
                    self.focal_scale * self.resolution as f64,
                )
            })
            .collect()
    }

    pub fn build(&self) -> Result<ViewSet> {
        ViewSet::new(self.cameras()?)
    }
}

/// `n` cameras evenly spaced on a horizontal circle, all looking at `center`.
pub fn orbit_views(center: Vector3<f64>, radius: f64, n: usize, resolution: u32) -> Result<ViewSet> {
    Orbit::new(center, radius, n, resolution).build()
}
