"""
What crosses a platform boundary
================================

Each platform hashes its own services and publishes only service ids plus
signature bits. The audit parses a wire message and flags any byte that the
id/bit layout does not account for.
"""

import struct

import numpy as np

from pdsr.federation import PlatformDataset, audit_privacy, deserialize_message, publish

rng = np.random.default_rng(3)
qos = rng.uniform(0.1, 1.0, (8, 5)) * (rng.random((8, 5)) < 0.7)
platform = PlatformDataset(platform_id=1, user_ids=np.arange(5), qos=qos)

# %%
# A message for round 1 with H=4 bits per service.

data = publish(platform, h=4, seed=42, round_=1)
msg = deserialize_message(data)
print(len(data), "bytes")
print(msg.payload[:3])
print("audit:", audit_privacy(data))

# %%
# Smuggling one raw QoS value into the tail of the message is caught.

leaky = data + struct.pack("<d", qos[qos > 0][0])
print("audit of tampered message:", audit_privacy(leaky))
