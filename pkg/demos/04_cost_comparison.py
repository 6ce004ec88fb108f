"""
Cost against the TinyZKP baseline
=================================

The headline comparison, the assumptions behind it, and how the memory
picture shifts once in-flight session state is counted.
"""

from banzkp import costmodel as cm
from banzkp.crypto import ProtocolParams

params = ProtocolParams.generate(2048)

for metric, b, t, saving in cm.comparison_table(params):
    print(f"{metric:>15}  banzkp={b:<10.6g} tinyzkp={t:<10.6g} saving={saving:6.2f}%")

print()
for name, value in cm.calibration(params):
    print(f"  {name} = {value}")

# persistent storage only vs. one handshake in flight per node
print()
for sessions in (0, 1, 2):
    print(f"sessions={sessions}: memory saving {100 * cm.memory_reduction(params, 6, sessions):.2f}%")

# data frames cost the same in both schemes, so the relative saving shrinks with traffic
print()
for frames in (0, 1, 5, 20, 100):
    e = cm.energy_comparison(traffic=cm.TrafficProfile(data_frames=frames))
    print(f"{frames:3d} data frames: energy saving {100 * e['reduction']:.2f}%")

# bigger groups cost bytes on the wire but not nominal field bits
print()
for width in (1096, 1536, 2048, 3072):
    sizes = cm.frame_sizes(ProtocolParams.generate(width), 16)
    print(f"W={width}: handshake + one reading = {8 * sum(sizes.values())} wire bits")
