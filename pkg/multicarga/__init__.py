"""
multicarga: termodinámica con varias cargas conservadas (posiblemente no
conmutantes). Estados térmicos generalizados, intercambio de cargas con el
baño, extracción de varios tipos de trabajo, teoría de números para la
selección robusta de pares y baterías explícitas.
"""

__version__ = '0.1.0'
