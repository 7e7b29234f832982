//! Software rasterization of depth and visible-object masks, plus synthetic
//! occluded scenes.

pub mod image_io;
mod raster;
mod scene;

pub use raster::{rasterize_depth, render_silhouette, render_visible_mask, DepthImage, MaskImage, DEPTH_TIE};
pub use scene::{generate_scene, Scene, SceneConfig, SceneEntry};
