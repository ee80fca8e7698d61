//! Subcarrier-domain ⇄ antenna-domain regrouping.
//!
//! Both views share the same (block, subcarrier, antenna) storage; switching
//! domain only changes which axis a series index selects.

use crate::error::{Error, Result};
use crate::tensor::{ChannelTensor, Domain};

pub fn to_antenna_domain(tensor: ChannelTensor) -> Result<ChannelTensor> {
    if tensor.domain != Domain::Subcarrier {
        return Err(Error::Contract("tensor is already in the antenna domain".into()));
    }
    Ok(ChannelTensor {
        domain: Domain::Antenna,
        ..tensor
    })
}

pub fn to_subcarrier_domain(tensor: ChannelTensor) -> Result<ChannelTensor> {
    if tensor.domain != Domain::Antenna {
        return Err(Error::Contract("tensor is already in the subcarrier domain".into()));
    }
    Ok(ChannelTensor {
        domain: Domain::Subcarrier,
        ..tensor
    })
}
