//! Scanned-form processing: corner detection, deskewing, cell cropping and
//! quality flags for the cropped cells.

mod form;
mod harris;
mod homography;
mod qa;

pub use form::{crop_cells, deskew, locate_form, render_form, FormLocation, GridSpec, GRID_LINE_WIDTH};
pub use harris::{harris, harris_response, harris_response_bound, refine_corner, response_peaks, Corner, HARRIS_K, HARRIS_SIGMA};
pub use homography::estimate_homography;
pub use qa::{ink_components, ink_mask, otsu_threshold, qa_flags, qa_flags_with, QaFlag, QaThresholds};
