//! Market, discounting and preference primitives.

mod discount;
mod market;
mod utility;

pub use discount::DiscountFunction;
pub use market::{MarketModel, MarketOptions, MarketSnapshot};
pub use utility::{Utility, UtilityFamily, WEALTH_FLOOR};
