//! Contrastive objectives over a mixed mini-batch and the centroid bank they use.

mod centroids;
mod terms;
mod total;
mod view;

pub use centroids::{build_centroids, mean_centroid, CentroidBank};
pub use terms::{
    augmentation_loss, augmentation_loss_scoped, camera_centroids_loss, centroids_loss, centroids_loss_scoped,
    instance_loss, instance_loss_scoped,
};
pub use total::{loss_terms, total_loss, CentroidUse, LossBreakdown, LossConfig, LossTerms, SingleCamUsage, TotalLoss};
pub use view::{BatchLabel, BatchView, LossOutput, Scope};
