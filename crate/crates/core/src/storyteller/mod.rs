//! Static SVG plots and the end-of-session story.

mod plots;
mod story;

pub use plots::{
    escape, format_r, histogram_counts, render_plot, PlotData, PlotError, PlotKind, PlotSpec, HEIGHT, PALETTE, WIDTH,
};
pub use story::{build_story, check_story_links, story_links, StoryError, StoryLink, ANALYSIS_OPS, ARTIFACT_DIR};
