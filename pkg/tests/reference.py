"""Independent chronological event-loop oracle for the vectorized engine.

A classic future-event-list simulation of one FIFO single server: arrivals
and departures are interleaved on a heap in time order, a deque holds the
waiting packets.  Service times are supplied per arrival index so the
oracle and the engine consume the identical randomness.
"""
import heapq
from collections import deque

# departures sort before arrivals at equal times: a packet leaving exactly
# when another arrives has already freed the server / left the system
DEPARTURE, ARRIVAL = 0, 1


def fifo_event_loop(arrivals, services):
    """Returns (departure times, packets found in system by each arrival)."""
    n = len(arrivals)
    events = [(t, ARRIVAL, i) for i, t in enumerate(arrivals)]
    heapq.heapify(events)
    waiting = deque()
    in_system = set()
    busy = False
    depart = [0.0] * n
    seen = [0] * n
    while events:
        t, kind, i = heapq.heappop(events)
        if kind == ARRIVAL:
            seen[i] = len(in_system)
            in_system.add(i)
            if not busy:
                busy = True
                depart[i] = t + services[i]
                heapq.heappush(events, (depart[i], DEPARTURE, i))
            else:
                waiting.append(i)
        else:
            in_system.discard(i)
            if waiting:
                j = waiting.popleft()
                depart[j] = t + services[j]
                heapq.heappush(events, (depart[j], DEPARTURE, j))
            else:
                busy = False
    return depart, seen
