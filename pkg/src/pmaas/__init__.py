"""Product-monitoring-as-a-service platform.

Fuses supply-chain traceability events (EPCIS capture) with IoT sensor
streams (downsampled time series) and answers product journey queries over
an authenticated REST API.
"""

__version__ = "0.1.0"
