//! Fold creases (blurred dark lines) and quilted wrinkle textures.

mod creases;
mod quilt;

pub use creases::{
    apply_creases, blur_separable, clip_line_to_page, gaussian_kernel, gaussian_kernel_1d,
    generate_crease_lines, CreaseLines, CreaseSpec, Kernel2D,
};
pub use quilt::{
    blend_wrinkles, min_cut_from_error, min_error_boundary_cut, procedural_seed_texture,
    quilt_texture, quilt_texture_with, Block, Cut, QuiltSpec,
};
